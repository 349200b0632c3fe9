"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dataset import generate_dataset, load_dataset, save_dataset, split
from .evaluation import (FIGURES, ExperimentReport, exp_capacity, exp_corr_vs_bs, exp_corr_vs_samples,
                         exp_corr_vs_snr, exp_overhead, exp_regression_table, fit_predictor, pearson)
from .mlp import init_model, layer_sizes, load_model, predict_pathloss, save_model
from .rrm import Mode
from .scenario import Environment, ScenarioError
from .trainer import LMDivergenceError, train

log = logging.getLogger("d2dpredict")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _snr(text: str) -> float | None:
    if text.lower() in ("inf", "none", "off"):
        return None
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="d2dpredict", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", help="output directory (overrides config output_dir)")

    g = sub.add_parser("gen-data", help="generate a learning dataset")
    common(g)
    g.add_argument("--env", choices=[e.value for e in Environment])
    g.add_argument("--samples", type=int)
    g.add_argument("--n-bs", type=int)
    g.add_argument("--snr-g-db", type=_snr, default=argparse.SUPPRESS, help="dB; 'inf' disables noise")
    g.add_argument("--out", help="dataset path (.csv for text, anything else binary)")

    t = sub.add_parser("train", help="train a network on a dataset file")
    common(t)
    t.add_argument("--dataset", required=True)
    t.add_argument("--max-epochs", type=int)
    t.add_argument("--out-model")
    t.add_argument("--report")

    e = sub.add_parser("eval", help="test-set Pearson and regression table for a trained model")
    common(e)
    e.add_argument("--model", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--rows", type=int, default=1000)

    r = sub.add_parser("rrm", help="sum capacity with true vs predicted gains")
    common(r)
    r.add_argument("--model", required=True)
    r.add_argument("--mode", choices=[m.value for m in Mode], default="shared")
    r.add_argument("--n-pairs", type=int, nargs="+")
    r.add_argument("--drops", type=int)

    o = sub.add_parser("overhead", help="signaling overhead table")
    common(o)
    o.add_argument("--n-bs", type=int, default=3)
    o.add_argument("--n-cues", type=int, default=10)
    o.add_argument("--n-pairs", type=int, nargs="+")

    rp = sub.add_parser("reproduce", help="run one figure's experiment")
    common(rp)
    rp.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    rp.add_argument("--env", choices=[e.value for e in Environment], action="append",
                    help="environment(s); default both")
    rp.add_argument("--samples", type=int)
    rp.add_argument("--seeds", type=int, nargs="+")
    rp.add_argument("--drops", type=int)
    rp.add_argument("--max-epochs", type=int)
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    upd = {}
    area = cfg.area
    if getattr(args, "env", None) and isinstance(args.env, str):
        area = replace(area, environment=Environment(args.env))
    if getattr(args, "n_bs", None) is not None and args.command == "gen-data":
        area = replace(area, n_bs=args.n_bs)
    upd["area"] = area
    if getattr(args, "samples", None) is not None:
        upd["n_samples"] = args.samples
    if getattr(args, "seed", None) is not None:
        upd["seed"] = args.seed
    if getattr(args, "seeds", None):
        upd["seeds"] = tuple(args.seeds)
    if getattr(args, "drops", None) is not None:
        upd["n_drops"] = args.drops
    if getattr(args, "max_epochs", None) is not None:
        upd["lm"] = replace(cfg.lm, max_epochs=args.max_epochs)
    if getattr(args, "out_dir", None):
        upd["output_dir"] = args.out_dir
    if "snr_g_db" in vars(args):
        upd["snr_g_db"] = args.snr_g_db
    try:
        return replace(cfg, **upd)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_report(rep: ExperimentReport, out_dir: Path, name: str, cfg: RunConfig, seed: int) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    rep.to_csv(path, cfg.manifest_line(seed))
    rep.write_plot_manifest(out_dir / f"{name}.plot.txt", path.name)
    print(path)
    return path


def _snr_value(v) -> float:
    return np.inf if v is None else float(v)


def cmd_gen_data(cfg: RunConfig, args) -> int:
    out = Path(args.out) if args.out else Path(cfg.output_dir) / f"dataset_{cfg.area.environment.value}.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = generate_dataset(cfg.area, cfg.radio, cfg.n_samples, cfg.seed, snr_g_db=_snr_value(cfg.snr_g_db))
    ds = replace(ds, meta={"area": cfg.area.to_dict(), "radio": cfg.radio.to_dict()})
    save_dataset(ds, out, manifest=cfg.manifest())
    print(f"{out}: {len(ds)} samples, L={ds.n_bs}, {ds.environment}")
    return 0


def _load_dataset(path):
    if not Path(path).is_file():
        raise UsageError(f"dataset file not found: {path}")
    return load_dataset(path)


def cmd_train(cfg: RunConfig, args) -> int:
    ds = _load_dataset(args.dataset)
    tr, te = split(ds, cfg.train_fraction)
    model = init_model(layer_sizes(ds.n_bs), cfg.seed)
    model, report = train(model, tr, replace(cfg.lm, seed=cfg.seed))
    area = ds.meta.get("area") or replace(cfg.area, environment=Environment(ds.environment), n_bs=ds.n_bs).to_dict()
    model = model.with_norm(model.norm, environment=ds.environment, n_bs=ds.n_bs, layout_seed=ds.layout_seed,
                            area=area, radio=ds.meta.get("radio", cfg.radio.to_dict()))
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.out_model) if args.out_model else out_dir / f"model_{ds.environment}.mlp"
    report_path = Path(args.report) if args.report else model_path.with_suffix(".train.csv")
    save_model(model, model_path, manifest=cfg.manifest())
    report.to_csv(report_path, cfg.manifest_line())
    score = pearson(te.targets, predict_pathloss(model, te.features))
    print(f"{model_path}: {len(report.train_mse)} epochs ({report.stop_reason}), test pearson {score:.4f}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    model = load_model(args.model)
    ds = _load_dataset(args.dataset)
    _, te = split(ds, cfg.train_fraction)
    score = pearson(te.targets, predict_pathloss(model, te.features))
    rep = exp_regression_table(model, te, args.rows, cfg.seed)
    _write_report(rep, Path(cfg.output_dir), f"fig6_{ds.environment}", cfg, cfg.seed)
    print(f"test pearson {score:.6f} over {len(te)} samples")
    return 0


def cmd_rrm(cfg: RunConfig, args) -> int:
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    model = load_model(args.model)
    mode = Mode(args.mode)
    fig = "fig9" if mode is Mode.SHARED else "fig10"
    n_values = args.n_pairs or cfg.experiments[fig]["n_values"]
    rep = exp_capacity(model, mode, n_values, cfg.n_drops, cfg.seed, cfg.rrm, cfg.radio)
    _write_report(rep, Path(cfg.output_dir), f"{fig}_{model.meta.get('environment', 'model')}", cfg, cfg.seed)
    return 0


def cmd_overhead(cfg: RunConfig, args) -> int:
    rep = exp_overhead(args.n_bs, args.n_cues, args.n_pairs or cfg.experiments["fig11"]["n_values"])
    _write_report(rep, Path(cfg.output_dir), "fig11", cfg, cfg.seed)
    return 0


def cmd_reproduce(cfg: RunConfig, args) -> int:
    fig = args.figure.lower()
    if fig not in FIGURES:
        raise UsageError(f"unknown figure '{args.figure}'; valid ids: {', '.join(FIGURES)}")
    out_dir = Path(cfg.output_dir)
    exps = cfg.experiments
    if fig == "fig11":
        rep = exp_overhead(cfg.area.n_bs, cfg.rrm.n_channels, exps["fig11"]["n_values"])
        _write_report(rep, out_dir, "fig11", cfg, cfg.seed)
        return 0
    envs = args.env or [e.value for e in Environment]
    common = dict(area=cfg.area, radio=cfg.radio, lm=cfg.lm)
    for env in envs:
        if fig == "fig5":
            rep = exp_corr_vs_bs(env, exps["fig5"]["l_values"], cfg.n_samples, cfg.seeds, **common)
        elif fig == "fig7":
            rep = exp_corr_vs_samples(env, exps["fig7"]["sample_counts"], cfg.area.n_bs, cfg.seeds, **common)
        elif fig == "fig8":
            snrs = [_snr_value(v) for v in exps["fig8"]["snr_values"]]
            rep = exp_corr_vs_snr(env, snrs, cfg.area.n_bs, cfg.n_samples, cfg.seeds, **common)
        else:
            fit = fit_predictor(env, cfg.area.n_bs, cfg.n_samples, cfg.seed, **common)
            if fig == "fig6":
                rep = exp_regression_table(fit.model, fit.test, exps["fig6"]["rows"], cfg.seed)
            else:
                mode = Mode.SHARED if fig == "fig9" else Mode.DEDICATED
                rep = exp_capacity(fit.model, mode, exps[fig]["n_values"], cfg.n_drops, cfg.seed, cfg.rrm, cfg.radio)
        _write_report(rep, out_dir, f"{fig}_{env}", cfg, cfg.seed)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "rrm": cmd_rrm,
    "overhead": cmd_overhead,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=max(1, args.threads)):
                return COMMANDS[args.command](cfg, args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"d2dpredict: error: {exc}", file=sys.stderr)
        return 1
    except (LMDivergenceError, ScenarioError, RuntimeError, OSError, ValueError) as exc:
        print(f"d2dpredict: failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
