"""Fully connected regression network: sigmoid hidden layers, one linear output.

Parameters flatten layer by layer, each layer contributing its weight matrix
(shape ``(out, in)``, row-major) followed by its bias vector. Levenberg-Marquardt
Jacobian columns use the same order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .dataset import NormStats
from .propagation import GainMatrixSet, gain_from_pathloss, pathloss_from_gain

PAPER_HIDDEN = (20, 18, 15, 12, 8)
_MAGIC = b"D2DMLP 1\n"


def layer_sizes(n_bs: int, hidden=PAPER_HIDDEN) -> tuple[int, ...]:
    return (2 * n_bs, *hidden, 1)


def n_params(sizes) -> int:
    return sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))


@dataclass(frozen=True)
class MlpModel:
    sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    norm: NormStats | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.sizes) < 2 or self.sizes[-1] != 1 or min(self.sizes) < 1:
            raise ValueError("sizes must be positive and end with a single output")
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.sizes[k + 1], self.sizes[k]) or b.shape != (self.sizes[k + 1],):
                raise ValueError(f"layer {k} parameter shapes do not match sizes")

    @property
    def n_params(self) -> int:
        return n_params(self.sizes)

    def params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(self.weights, self.biases)])

    def with_params(self, theta) -> MlpModel:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        Ws, bs = [], []
        pos = 0
        for i, o in zip(self.sizes[:-1], self.sizes[1:]):
            Ws.append(theta[pos:pos + i * o].reshape(o, i).copy())
            pos += i * o
            bs.append(theta[pos:pos + o].copy())
            pos += o
        return replace(self, weights=tuple(Ws), biases=tuple(bs))

    def with_norm(self, norm: NormStats, **meta) -> MlpModel:
        return replace(self, norm=norm, meta={**self.meta, **meta})


def init_model(sizes, seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    sizes = tuple(int(s) for s in sizes)
    rng = np.random.default_rng(seed)
    Ws, bs = [], []
    for i, o in zip(sizes[:-1], sizes[1:]):
        r = np.sqrt(6.0 / (i + o))
        Ws.append(rng.uniform(-r, r, size=(o, i)))
        bs.append(np.zeros(o))
    return MlpModel(sizes, tuple(Ws), tuple(bs))


def forward(model: MlpModel, x):
    """Normalized prediction for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    a = np.atleast_2d(x)
    if a.shape[1] != model.sizes[0]:
        raise ValueError(f"expected {model.sizes[0]} features, got {a.shape[1]}")
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        a = z if k == last else expit(z)
    y = a[:, 0]
    return float(y[0]) if x.ndim == 1 else y


def forward_with_gradient(model: MlpModel, x):
    """Prediction and its gradient with respect to the flat parameter vector.

    For a batch ``x`` of shape (B, n_in) returns ``(y, J)`` with ``J`` of shape
    (B, P): row s is d y_s / d theta.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    B = a.shape[0]
    acts = [a]
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ W.T + b
        acts.append(z if k == last else expit(z))

    J = np.empty((B, model.n_params))
    offsets = []
    pos = 0
    for i, o in zip(model.sizes[:-1], model.sizes[1:]):
        offsets.append(pos)
        pos += i * o + o

    delta = np.ones((B, 1))
    for k in range(last, -1, -1):
        i, o = model.sizes[k], model.sizes[k + 1]
        p = offsets[k]
        J[:, p:p + i * o] = (delta[:, :, None] * acts[k][:, None, :]).reshape(B, o * i)
        J[:, p + i * o:p + i * o + o] = delta
        if k > 0:
            s = acts[k]
            delta = (delta @ model.weights[k]) * s * (1.0 - s)
    y = acts[-1][:, 0]
    if single:
        return float(y[0]), J[0]
    return y, J


def predict_pathloss(model: MlpModel, features_db):
    """Denormalized path-loss prediction in dB for raw (un-normalized) features."""
    if model.norm is None:
        raise ValueError("model has no normalization statistics; train it first")
    f = np.asarray(features_db, dtype=float)
    if f.shape[-1] != model.sizes[0]:
        raise ValueError(f"expected {model.sizes[0]} features, got {f.shape[-1]}")
    yn = forward(model, model.norm.apply(f))
    pl = model.norm.invert_target(yn)
    return float(pl) if np.ndim(pl) == 0 else pl


def predict_gain(model: MlpModel, cell_gains_db):
    """(path loss dB, linear gain); the linear gain is capped at 1 (0 dB)."""
    pl = predict_pathloss(model, cell_gains_db)
    return pl, gain_from_pathloss(np.maximum(pl, 0.0))


def predict_gain_matrices(model: MlpModel, gains: GainMatrixSet) -> GainMatrixSet:
    """Replace the UE-UE gains of ``gains`` by predictions from its cellular gains.

    Each unordered pair i < j is predicted once with the (i, j) feature order
    and mirrored, keeping the matrix symmetric.
    """
    U = len(gains.cellular)
    pl_cell = pathloss_from_gain(gains.cellular)
    iu, ju = np.triu_indices(U, k=1)
    d2d = np.ones((U, U))
    if len(iu):
        _, g = predict_gain(model, np.hstack([pl_cell[iu], pl_cell[ju]]))
        d2d[iu, ju] = g
        d2d[ju, iu] = g
    return GainMatrixSet(gains.cellular.copy(), d2d, gains.n_pairs, gains.n_cues)


# persistence --------------------------------------------------------------

def save_model(model: MlpModel, path, manifest: dict | None = None) -> None:
    """Header line (JSON: sizes, norm stats, metadata) then little-endian float64 parameters."""
    header = {"format": "d2dpredict-mlp", "version": 1, "sizes": list(model.sizes),
              "n_params": model.n_params, "norm": model.norm.to_dict() if model.norm else None,
              "meta": model.meta}
    if manifest:
        header["manifest"] = manifest
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(model.params().astype("<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(Path(path), "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path} is not a d2dpredict model file")
        header = json.loads(fh.readline())
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(float)
    sizes = tuple(header["sizes"])
    skeleton = init_model(sizes, 0)
    model = skeleton.with_params(theta)
    norm = NormStats.from_dict(header["norm"]) if header["norm"] else None
    return replace(model, norm=norm, meta=header.get("meta", {}))
