"""Run configuration: one JSON document whose defaults reproduce the simulation table.

Top-level keys::

    area        AreaConfig fields (side_m, n_bs, n_pairs, n_cues, d_max_m, environment, ...)
    radio       RadioParams fields (fc_hz, wall_loss_db, noise_density_dbm_hz)
    lm          LmConfig fields (mu_init, max_epochs, batch_size, ...)
    rrm         RrmConfig fields (bandwidth_hz, n_channels, channel_bw_hz, p_max_dbm, ...)
    n_samples   learning samples per dataset (1 000 000)
    train_fraction
    snr_g_db    cellular estimation SNR in dB, null for noiseless
    seed        seed for single runs; seeds: replica seeds for experiments
    n_drops     drops per point in capacity experiments
    experiments per-figure axis values (fig5.l_values, fig7.sample_counts, ...)
    output_dir
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .propagation import RadioParams
from .rrm import RrmConfig
from .scenario import AreaConfig
from .trainer import LmConfig


class ConfigError(ValueError):
    pass


def _default_experiments() -> dict:
    return {
        "fig5": {"l_values": [1, 2, 3, 4, 5]},
        "fig6": {"rows": 1000},
        "fig7": {"sample_counts": [1000, 10000, 100000, 1000000]},
        "fig8": {"snr_values": [0, 10, 20, 30, 40, 50, None]},
        "fig9": {"n_values": [2, 4, 6, 8, 10]},
        "fig10": {"n_values": [2, 4, 6, 8, 10]},
        "fig11": {"n_values": [2, 3, 4, 5, 6, 7, 8, 9, 10]},
    }


@dataclass(frozen=True)
class RunConfig:
    area: AreaConfig = AreaConfig()
    radio: RadioParams = RadioParams()
    lm: LmConfig = LmConfig()
    rrm: RrmConfig = RrmConfig()
    n_samples: int = 1_000_000
    train_fraction: float = 0.7
    snr_g_db: float | None = None
    seed: int = 0
    seeds: tuple[int, ...] = (0,)
    n_drops: int = 100
    experiments: dict = field(default_factory=_default_experiments)
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "area": self.area.to_dict(),
            "radio": self.radio.to_dict(),
            "lm": self.lm.to_dict(),
            "rrm": self.rrm.to_dict(),
            "n_samples": self.n_samples,
            "train_fraction": self.train_fraction,
            "snr_g_db": self.snr_g_db,
            "seed": self.seed,
            "seeds": list(self.seeds),
            "n_drops": self.n_drops,
            "experiments": self.experiments,
            "output_dir": self.output_dir,
        }

    def config_hash(self) -> str:
        """Hash of every setting that affects results; the output directory is left out."""
        d = self.to_dict()
        del d["output_dir"]
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def manifest(self, seed: int | None = None) -> dict:
        return {"tool": "d2dpredict", "version": __version__, "config_hash": self.config_hash(),
                "seed": self.seed if seed is None else seed}

    def manifest_line(self, seed: int | None = None) -> str:
        m = self.manifest(seed)
        return f"# {m['tool']} {m['version']} config_hash={m['config_hash']} seed={m['seed']}"


def _merge(cls, base, overrides: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    values = base.to_dict()
    values.update(overrides)
    try:
        if cls is AreaConfig:
            return AreaConfig.from_dict(values)
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}]: {exc}") from exc


def config_from_dict(d: dict) -> RunConfig:
    d = dict(d)
    cfg = RunConfig()
    sections = {"area": AreaConfig, "radio": RadioParams, "lm": LmConfig, "rrm": RrmConfig}
    updates = {}
    for key, cls in sections.items():
        if key in d:
            updates[key] = _merge(cls, getattr(cfg, key), d.pop(key) or {}, key)
    if "experiments" in d:
        exps = _default_experiments()
        for fig, opts in (d.pop("experiments") or {}).items():
            if fig not in exps:
                raise ConfigError(f"unknown experiment '{fig}'")
            exps[fig].update(opts)
        updates["experiments"] = exps
    if "seeds" in d:
        updates["seeds"] = tuple(int(s) for s in d.pop("seeds"))
    scalar = {f.name for f in fields(RunConfig)} - set(sections) - {"experiments", "seeds"}
    unknown = set(d) - scalar
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    updates.update(d)
    cfg = replace(cfg, **updates)
    if cfg.n_samples < 1 or not 0.0 < cfg.train_fraction < 1.0 or cfg.n_drops < 1:
        raise ConfigError("n_samples and n_drops must be >= 1 and train_fraction in (0, 1)")
    return cfg


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        d = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("config root must be an object")
    return config_from_dict(d)
