"""Supervised samples: 2L cellular path losses -> one D2D path loss, all in dB."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .propagation import RadioParams, apply_estimation_noise, gain_from_pathloss, pathloss_from_gain, segment_pathloss_db
from .scenario import AreaConfig, Layout, generate_layout, sample_free_points

CHUNK = 1 << 15
_MAGIC = b"D2DDATA 1\n"


class Sample(NamedTuple):
    features: np.ndarray
    target: float


@dataclass(frozen=True)
class Dataset:
    """Feature columns: i-side BS 1..L, then j-side BS 1..L; target is the i-j path loss."""

    features: np.ndarray  # (S, 2L)
    targets: np.ndarray  # (S,)
    environment: str
    n_bs: int
    seed: int
    layout_seed: int
    snr_g_db: float = np.inf
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != 2 * self.n_bs:
            raise ValueError(f"features must have shape (S, {2 * self.n_bs})")
        if len(self.features) != len(self.targets):
            raise ValueError("features and targets differ in length")
        if len(self.targets) == 0:
            raise ValueError("dataset is empty")

    def __len__(self) -> int:
        return len(self.targets)

    def __getitem__(self, s: int) -> Sample:
        return Sample(self.features[s], float(self.targets[s]))

    def subset(self, idx) -> Dataset:
        return replace(self, features=self.features[idx], targets=self.targets[idx])

    def header(self) -> dict:
        snr = None if np.isinf(self.snr_g_db) else float(self.snr_g_db)
        return {"L": self.n_bs, "environment": self.environment, "seed": self.seed,
                "layout_seed": self.layout_seed, "count": len(self), "snr_g_db": snr, **self.meta}


def pair_samples(layout: Layout, radio: RadioParams, ue_i: np.ndarray, ue_j: np.ndarray):
    """Noiseless features (S, 2L) and targets (S,) for UE positions ``ue_i``, ``ue_j`` of shape (S, 3)."""
    bld = layout.buildings
    L = len(layout.bs_positions)
    feats = np.empty((len(ue_i), 2 * L))
    for side, ue in enumerate((ue_i, ue_j)):
        for l, bs in enumerate(layout.bs_positions):
            pl, _, _ = segment_pathloss_db(ue, np.broadcast_to(bs, ue.shape), bld, radio)
            feats[:, side * L + l] = pl
    target, _, _ = segment_pathloss_db(ue_i, ue_j, bld, radio)
    return feats, target


def _chunk_samples(config: AreaConfig, radio: RadioParams, layout: Layout, n: int, rng, snr_g_db: float):
    z = config.ue_height_m
    ue_i = np.column_stack([sample_free_points(n, config, layout.buildings, rng), np.full(n, z)])
    ue_j = np.column_stack([sample_free_points(n, config, layout.buildings, rng), np.full(n, z)])
    feats, target = pair_samples(layout, radio, ue_i, ue_j)
    if not np.isinf(snr_g_db):
        noisy = apply_estimation_noise(gain_from_pathloss(feats), snr_g_db, rng)
        feats = pathloss_from_gain(noisy)
    return feats, target


def generate_dataset(
    config: AreaConfig,
    radio: RadioParams,
    n_samples: int,
    seed: int,
    layout: Layout | None = None,
    snr_g_db: float = np.inf,
) -> Dataset:
    """Draw ``n_samples`` independent UE pairs in one fixed area layout.

    The layout (buildings, BS positions) defaults to ``generate_layout(config, seed)``.
    Pairs are not restricted to ``d_max`` so that interference links are
    covered too. Samples are generated in fixed-size chunks with per-chunk
    seeds, so the output does not depend on how the work is split.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if layout is None:
        layout = generate_layout(config, seed)
    feats, targets = [], []
    for c, start in enumerate(range(0, n_samples, CHUNK)):
        rng = np.random.default_rng([seed, 2, c])
        f, t = _chunk_samples(config, radio, layout, min(CHUNK, n_samples - start), rng, snr_g_db)
        feats.append(f)
        targets.append(t)
    return Dataset(np.concatenate(feats), np.concatenate(targets), config.environment.value,
                   len(layout.bs_positions), seed, layout.seed, float(snr_g_db))


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(round(n * train_fraction))
    if n_train == 0 or n_train == n:
        raise ValueError("split leaves one side empty")
    perm = np.random.default_rng([seed, 3]).permutation(n)
    return perm[:n_train], perm[n_train:]


def split(dataset: Dataset, train_fraction: float = 0.7) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(len(dataset), train_fraction, dataset.seed)
    return dataset.subset(tr), dataset.subset(te)


@dataclass(frozen=True)
class NormStats:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_std

    def invert(self, xn):
        return np.asarray(xn, dtype=float) * self.feature_std + self.feature_mean

    def apply_target(self, y):
        return (np.asarray(y, dtype=float) - self.target_mean) / self.target_std

    def invert_target(self, yn):
        return np.asarray(yn, dtype=float) * self.target_std + self.target_mean

    def to_dict(self) -> dict:
        return {"feature_mean": self.feature_mean.tolist(), "feature_std": self.feature_std.tolist(),
                "target_mean": self.target_mean, "target_std": self.target_std}

    @classmethod
    def from_dict(cls, d: dict) -> NormStats:
        return cls(np.array(d["feature_mean"], dtype=float), np.array(d["feature_std"], dtype=float),
                   float(d["target_mean"]), float(d["target_std"]))


def fit_norm(train: Dataset | tuple[np.ndarray, np.ndarray]) -> NormStats:
    """z-score statistics from training data only."""
    X, y = (train.features, train.targets) if isinstance(train, Dataset) else train
    fstd = X.std(axis=0)
    tstd = float(y.std())
    if np.any(fstd <= 0) or tstd <= 0:
        raise ValueError("zero-variance feature or target; cannot normalize")
    return NormStats(X.mean(axis=0), fstd, float(y.mean()), tstd)


# persistence --------------------------------------------------------------

def save_dataset(dataset: Dataset, path, manifest: dict | None = None) -> None:
    """Binary (default) or CSV (``.csv`` suffix) file with a header line.

    Column order in both formats: i-side BS 1..L, j-side BS 1..L, target.
    The binary payload is little-endian float64, row-major.
    """
    path = Path(path)
    header = dataset.header()
    if manifest:
        header["manifest"] = manifest
    table = np.column_stack([dataset.features, dataset.targets])
    if path.suffix == ".csv":
        L = dataset.n_bs
        cols = [f"i_bs{l + 1}" for l in range(L)] + [f"j_bs{l + 1}" for l in range(L)] + ["target"]
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write(",".join(cols) + "\n")
            for row in table:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            fh.write(table.astype("<f8").tobytes())


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path) as fh:
            header = json.loads(fh.readline()[2:])
            fh.readline()
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
    else:
        with open(path, "rb") as fh:
            if fh.readline() != _MAGIC:
                raise ValueError(f"{path} is not a d2dpredict dataset file")
            header = json.loads(fh.readline())
            table = np.frombuffer(fh.read(), dtype="<f8").astype(float)
        table = table.reshape(header["count"], 2 * header["L"] + 1)
    snr = np.inf if header.get("snr_g_db") is None else header["snr_g_db"]
    meta = {k: v for k, v in header.items()
            if k not in ("L", "environment", "seed", "layout_seed", "count", "snr_g_db")}
    return Dataset(np.ascontiguousarray(table[:, :-1]), np.ascontiguousarray(table[:, -1]), header["environment"],
                   header["L"], header["seed"], header["layout_seed"], snr, meta)
