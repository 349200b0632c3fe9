"""Pearson metric and the experiment runners behind figures 5 to 11."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset, generate_dataset, split
from .mlp import MlpModel, init_model, layer_sizes, predict_gain_matrices, predict_pathloss
from .propagation import RadioParams, compute_gain_matrices
from .rrm import (Mode, RrmConfig, allocate_channels_greedy, binary_power_control_greedy,
                  signaling_overhead, sum_capacity)
from .scenario import AreaConfig, Environment, Layout, generate_layout, generate_scenario
from .trainer import LmConfig, TrainReport, train

log = logging.getLogger(__name__)

FIGURES = ("fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11")


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two equal-length vectors of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("zero variance input")
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentReport:
    experiment_id: str
    axis: str
    columns: list[str]
    metrics: list[str]
    series: list[str] = field(default_factory=list)
    rows: list[list] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, **values) -> None:
        self.rows.append([values[c] for c in self.columns])

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def where(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            d = dict(zip(self.columns, r))
            if all(d[k] == v for k, v in match.items()):
                out.append(d)
        return out

    def to_csv(self, path, manifest: str | None = None) -> None:
        with open(Path(path), "w", newline="") as fh:
            if manifest:
                fh.write(manifest + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(v) for v in r])

    def write_plot_manifest(self, path, csv_name: str) -> None:
        lines = [
            f"experiment: {self.experiment_id}",
            f"data: {csv_name}",
            f"x: {self.axis}",
            f"y: {', '.join(self.metrics)}",
            f"series: {', '.join(self.series) if self.series else '-'}",
        ]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class FitResult:
    model: MlpModel
    report: TrainReport
    test: Dataset
    score: float
    layout: Layout


def fit_predictor(
    environment: Environment | str,
    n_bs: int,
    n_samples: int,
    seed: int,
    area: AreaConfig = AreaConfig(),
    radio: RadioParams = RadioParams(),
    lm: LmConfig = LmConfig(),
    snr_g_db: float = np.inf,
    train_fraction: float = 0.7,
) -> FitResult:
    """Generate a dataset for one area, train a network on 70% and score Pearson on the rest."""
    cfg = replace(area, environment=Environment(environment), n_bs=n_bs)
    layout = generate_layout(cfg, seed)
    ds = generate_dataset(cfg, radio, n_samples, seed, layout=layout, snr_g_db=snr_g_db)
    tr, te = split(ds, train_fraction)
    model = init_model(layer_sizes(n_bs), seed)
    model, report = train(model, tr, replace(lm, seed=seed))
    model = model.with_norm(model.norm, environment=cfg.environment.value, n_bs=n_bs,
                            layout_seed=layout.seed, area=cfg.to_dict(), radio=radio.to_dict())
    score = pearson(te.targets, predict_pathloss(model, te.features))
    log.info("%s L=%d S=%d seed=%d snr=%s: pearson %.4f (%d epochs, %s)", cfg.environment.value, n_bs,
             n_samples, seed, snr_g_db, score, report.final_epoch + 1, report.stop_reason)
    return FitResult(model, report, te, score, layout)


_CORR_COLUMNS = ["environment", "n_bs", "n_samples", "snr_g_db", "seed", "pearson", "epochs", "stop_reason"]


def _corr_row(rep: ExperimentReport, env, n_bs, n_samples, snr, seed, fit: FitResult) -> None:
    rep.add(environment=Environment(env).value, n_bs=n_bs, n_samples=n_samples,
            snr_g_db="inf" if np.isinf(snr) else snr, seed=seed, pearson=fit.score,
            epochs=len(fit.report.train_mse), stop_reason=fit.report.stop_reason)


def exp_corr_vs_bs(environment, l_values=(1, 2, 3, 4, 5), n_samples: int = 10_000, seeds=(0,),
                   area: AreaConfig = AreaConfig(), radio: RadioParams = RadioParams(),
                   lm: LmConfig = LmConfig()) -> ExperimentReport:
    rep = ExperimentReport("fig5", "n_bs", list(_CORR_COLUMNS), ["pearson"], ["environment"], seeds=list(seeds),
                           config={"area": area.to_dict(), "lm": lm.to_dict()})
    for L in l_values:
        for s in seeds:
            fit = fit_predictor(environment, L, n_samples, s, area, radio, lm)
            _corr_row(rep, environment, L, n_samples, np.inf, s, fit)
    return rep


def exp_regression_table(model: MlpModel, test_set: Dataset, n_rows: int = 1000, seed: int = 0) -> ExperimentReport:
    """Paired (true, predicted) path losses in dB for a random subset of the test set."""
    n = min(n_rows, len(test_set))
    idx = np.sort(np.random.default_rng([seed, 5]).choice(len(test_set), size=n, replace=False))
    sub = test_set.subset(idx)
    pred = np.atleast_1d(predict_pathloss(model, sub.features))
    rep = ExperimentReport("fig6", "true_pl_db", ["true_pl_db", "predicted_pl_db"], ["predicted_pl_db"],
                           seeds=[seed], config={"environment": test_set.environment, "n_bs": test_set.n_bs})
    for t, p in zip(sub.targets, pred):
        rep.add(true_pl_db=float(t), predicted_pl_db=float(p))
    return rep


def exp_corr_vs_samples(environment, sample_counts=(1_000, 10_000, 100_000), n_bs: int = 3, seeds=(0,),
                        area: AreaConfig = AreaConfig(), radio: RadioParams = RadioParams(),
                        lm: LmConfig = LmConfig()) -> ExperimentReport:
    rep = ExperimentReport("fig7", "n_samples", list(_CORR_COLUMNS), ["pearson"], ["environment"],
                           seeds=list(seeds), config={"area": area.to_dict(), "lm": lm.to_dict()})
    for S in sample_counts:
        for s in seeds:
            fit = fit_predictor(environment, n_bs, S, s, area, radio, lm)
            _corr_row(rep, environment, n_bs, S, np.inf, s, fit)
    return rep


def exp_corr_vs_snr(environment, snr_values=(0, 10, 20, 30, 40, 50, np.inf), n_bs: int = 3,
                    n_samples: int = 10_000, seeds=(0,), area: AreaConfig = AreaConfig(),
                    radio: RadioParams = RadioParams(), lm: LmConfig = LmConfig()) -> ExperimentReport:
    """Pearson vs cellular estimation SNR; noise corrupts training and test features alike."""
    rep = ExperimentReport("fig8", "snr_g_db", list(_CORR_COLUMNS), ["pearson"], ["environment"],
                           seeds=list(seeds), config={"area": area.to_dict(), "lm": lm.to_dict()})
    for snr in snr_values:
        for s in seeds:
            fit = fit_predictor(environment, n_bs, n_samples, s, area, radio, lm, snr_g_db=float(snr))
            _corr_row(rep, environment, n_bs, n_samples, float(snr), s, fit)
    return rep


def drop_seed(seed: int, n_pairs: int, drop: int) -> int:
    return int(np.random.SeedSequence([seed, n_pairs, drop]).generate_state(1)[0])


def capacity_drop(model: MlpModel, layout: Layout, area: AreaConfig, mode: Mode, rrm: RrmConfig,
                  seed: int, radio: RadioParams = RadioParams()) -> tuple[float, float]:
    """Sum capacity (on true gains) of the RRM decision made with true and with predicted gains."""
    scenario = generate_scenario(area, seed, layout)
    true = compute_gain_matrices(scenario, radio)
    pred = predict_gain_matrices(model, true)
    if mode is Mode.SHARED:
        c_true = sum_capacity(true, allocate_channels_greedy(true, rrm), None, rrm)
        c_pred = sum_capacity(true, allocate_channels_greedy(pred, rrm), None, rrm)
    else:
        c_true = sum_capacity(true, None, binary_power_control_greedy(true, rrm), rrm)
        c_pred = sum_capacity(true, None, binary_power_control_greedy(pred, rrm), rrm)
    return c_true, c_pred


def exp_capacity(model: MlpModel, mode: Mode | str, n_values=(2, 4, 6, 8, 10), n_drops: int = 100,
                 seed: int = 0, rrm: RrmConfig | None = None, radio: RadioParams = RadioParams()) -> ExperimentReport:
    """Mean D2D sum capacity per pair count when the RRM algorithm sees true vs predicted gains.

    Both decisions are scored on the true gains. ``relative_gap`` is
    ``(mean_true - mean_predicted) / mean_true``.
    """
    mode = Mode(mode)
    rrm = replace(rrm or RrmConfig(), mode=mode)
    if not model.meta.get("area"):
        raise ValueError("model carries no area metadata; train it with fit_predictor or the CLI")
    base = AreaConfig.from_dict(model.meta["area"])
    layout = generate_layout(base, model.meta["layout_seed"])
    n_cues = rrm.n_channels if mode is Mode.SHARED else 0
    fig = "fig9" if mode is Mode.SHARED else "fig10"
    rep = ExperimentReport(fig, "n_pairs",
                           ["environment", "n_pairs", "mode", "gains_source", "sum_capacity", "relative_gap",
                            "drops", "overhead_total", "overhead_cellular", "overhead_reduction"],
                           ["sum_capacity"], ["environment", "gains_source"], seeds=[seed],
                           config={"area": base.to_dict(), "rrm": rrm.to_dict(), "n_drops": n_drops})
    for N in n_values:
        area = replace(base, n_pairs=N, n_cues=n_cues)
        caps = np.array([capacity_drop(model, layout, area, mode, rrm, drop_seed(seed, N, d), radio)
                         for d in range(n_drops)])
        mean_true, mean_pred = caps.mean(axis=0)
        gap = (mean_true - mean_pred) / mean_true
        ov = signaling_overhead(base.n_bs, N, n_cues, mode)
        for source, value in (("true", mean_true), ("predicted", mean_pred)):
            rep.add(environment=base.environment.value, n_pairs=N, mode=mode.value, gains_source=source,
                    sum_capacity=float(value), relative_gap=float(gap), drops=n_drops,
                    overhead_total=ov.total if source == "true" else ov.cellular,
                    overhead_cellular=ov.cellular, overhead_reduction=ov.reduction)
        log.info("%s %s N=%d: true %.4g pred %.4g gap %.4f", base.environment.value, mode.value, N,
                 mean_true, mean_pred, gap)
    return rep


def exp_overhead(L: int = 3, M: int = 10, n_values=range(2, 11)) -> ExperimentReport:
    rep = ExperimentReport("fig11", "n_pairs", ["n_pairs", "mode", "total", "cellular", "reduction", "ratio"],
                           ["total", "cellular"], ["mode"], config={"L": L, "M": M})
    for mode in Mode:
        for N in n_values:
            ov = signaling_overhead(L, N, M, mode)
            rep.add(n_pairs=N, mode=mode.value, total=ov.total, cellular=ov.cellular,
                    reduction=ov.reduction, ratio=ov.ratio)
    return rep
