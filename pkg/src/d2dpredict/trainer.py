"""Levenberg-Marquardt training of the regression network on a mean-squared-error loss."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.linalg.blas import dsyrk

from .dataset import Dataset, fit_norm
from .mlp import MlpModel, forward, forward_with_gradient

log = logging.getLogger(__name__)


class LMDivergenceError(RuntimeError):
    """No step could be accepted before the damping hit its cap."""

    def __init__(self, message: str, report: TrainReport):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LmConfig:
    mu_init: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    mu_max: float = 1e10
    mu_min: float = 1e-20
    max_epochs: int = 1000
    batch_size: int = 2000
    loss_tolerance: float = 1e-6
    tolerance_window: int = 5
    validation_fraction: float = 0.1
    val_patience: int = 30
    grad_tolerance: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.mu_init <= 0:
            raise ValueError("mu_init must be positive")
        if not self.mu_increase > 1.0 > self.mu_decrease > 0.0:
            raise ValueError("need mu_increase > 1 > mu_decrease > 0")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    mu: list[float] = field(default_factory=list)
    wall_clock: list[float] = field(default_factory=list)
    final_epoch: int = 0
    best_epoch: int = 0
    stop_reason: str = ""

    def to_csv(self, path, manifest: str | None = None) -> None:
        with open(Path(path), "w", newline="") as fh:
            if manifest:
                fh.write(manifest + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_mse", "val_mse", "mu"])
            for e, (tr, va, mu) in enumerate(zip(self.train_mse, self.val_mse, self.mu)):
                w.writerow([e, repr(tr), repr(va), repr(mu)])


# generic LM core ----------------------------------------------------------

def solve_damped(JtJ: np.ndarray, Jtr: np.ndarray, mu: float) -> np.ndarray:
    """Solve (JtJ + mu I) delta = Jtr by Cholesky; raises LinAlgError if not positive definite."""
    A = JtJ + mu * np.eye(len(JtJ))
    c = cho_factor(A, lower=True, check_finite=True)
    delta = cho_solve(c, Jtr)
    if not np.all(np.isfinite(delta)):
        raise LinAlgError("non-finite step")
    return delta


def levenberg_marquardt(
    theta0,
    linearize: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, float]],
    objective: Callable[[np.ndarray], float],
    config: LmConfig,
    on_accept: Callable[[int, np.ndarray, float, float], bool] | None = None,
    report: TrainReport | None = None,
) -> tuple[np.ndarray, TrainReport]:
    """Minimize a sum-of-squares objective with Marquardt's x10 / x0.1 damping schedule.

    ``linearize(theta)`` returns ``(J^T J, J^T r, loss)`` where ``r = y - f(theta)``
    and ``J = d f / d theta``; ``objective(theta)`` returns the loss alone.
    ``on_accept(epoch, theta, loss, mu)`` runs after each accepted step and
    may return True to request an early stop.
    """
    report = report if report is not None else TrainReport()
    theta = np.array(theta0, dtype=float)
    mu = config.mu_init
    t0 = time.perf_counter()
    accepted = 0
    report.stop_reason = "max_epochs"
    for epoch in range(config.max_epochs):
        JtJ, Jtr, loss = linearize(theta)
        if loss == 0.0 or np.max(np.abs(Jtr)) <= config.grad_tolerance:
            report.stop_reason = "gradient"
            break
        while True:
            try:
                delta = solve_damped(JtJ, Jtr, mu)
                cand = theta + delta
                cand_loss = objective(cand)
            except LinAlgError:
                cand_loss = np.inf
            if cand_loss < loss:
                theta = cand
                loss = cand_loss
                mu = max(mu * config.mu_decrease, config.mu_min)
                break
            mu *= config.mu_increase
            if mu > config.mu_max:
                break
        if mu > config.mu_max:
            report.stop_reason = "mu_max"
            if accepted == 0:
                raise LMDivergenceError("damping exceeded mu_max before any step was accepted", report)
            break
        accepted += 1
        report.train_mse.append(float(loss))
        report.mu.append(float(mu))
        report.wall_clock.append(time.perf_counter() - t0)
        report.final_epoch = epoch
        if on_accept is not None and on_accept(epoch, theta, loss, mu):
            report.stop_reason = "early_stop"
            break
        w = config.tolerance_window
        if len(report.train_mse) > w:
            old = report.train_mse[-1 - w]
            if (old - loss) / max(old, np.finfo(float).tiny) < config.loss_tolerance:
                report.stop_reason = "loss_tolerance"
                break
    return theta, report


# network-specific pieces ---------------------------------------------------

def normal_equations(model: MlpModel, X: np.ndarray, y: np.ndarray, batch_size: int = 2000):
    """Accumulate J^T J, J^T r and the MSE over batches without materializing J."""
    P = model.n_params
    JtJ = np.zeros((P, P), order="F")
    Jtr = np.zeros(P)
    sse = 0.0
    for start in range(0, len(y), batch_size):
        yhat, J = forward_with_gradient(model, X[start:start + batch_size])
        r = y[start:start + batch_size] - yhat
        JtJ = dsyrk(1.0, J, beta=1.0, c=JtJ, trans=1, lower=1, overwrite_c=1)
        Jtr += J.T @ r
        sse += float(r @ r)
    JtJ = np.tril(JtJ) + np.tril(JtJ, -1).T
    return JtJ, Jtr, sse / len(y)


def _mse(model: MlpModel, X: np.ndarray, y: np.ndarray, batch_size: int = 50_000) -> float:
    sse = 0.0
    for start in range(0, len(y), batch_size):
        r = y[start:start + batch_size] - forward(model, X[start:start + batch_size])
        sse += float(r @ r)
    return sse / len(y)


def mse_loss(model: MlpModel, dataset: Dataset) -> float:
    """Mean squared error on normalized targets."""
    if model.norm is None:
        raise ValueError("model has no normalization statistics")
    X = model.norm.apply(dataset.features)
    y = model.norm.apply_target(dataset.targets)
    return _mse(model, X, y)


def lm_step(model: MlpModel, X: np.ndarray, y: np.ndarray, mu: float, batch_size: int = 2000):
    """One damped Gauss-Newton step on a batch of (normalized) inputs and targets.

    Returns the candidate parameter vector and the loss predicted by the
    linearized model, ``||r - J delta||^2 / S``.
    """
    if len(y) == 0:
        raise ValueError("empty batch")
    if mu <= 0:
        raise ValueError("mu must be positive")
    JtJ, Jtr, loss = normal_equations(model, X, y, batch_size)
    delta = solve_damped(JtJ, Jtr, mu)
    S = len(y)
    predicted = loss - (2.0 * delta @ Jtr - delta @ JtJ @ delta) / S
    return model.params() + delta, float(predicted)


def train(model: MlpModel, train_set: Dataset, config: LmConfig = LmConfig()) -> tuple[MlpModel, TrainReport]:
    """Fit ``model`` to ``train_set``; returns the best-validation parameters.

    Normalization statistics are fitted on ``train_set`` and attached to the
    returned model, unless ``model`` already carries some. A ``validation_fraction`` slice of ``train_set`` is held
    out for early stopping.
    """
    norm = model.norm if model.norm is not None else fit_norm(train_set)
    X = norm.apply(train_set.features)
    y = norm.apply_target(train_set.targets)
    n_val = int(round(len(y) * config.validation_fraction))
    perm = np.random.default_rng([config.seed, 4]).permutation(len(y))
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    Xf, yf = X[fit_idx], y[fit_idx]
    Xv, yv = X[val_idx], y[val_idx]
    model = model.with_norm(norm)

    report = TrainReport()
    best = {"theta": model.params(), "val": np.inf, "epoch": 0}

    def linearize(theta):
        return normal_equations(model.with_params(theta), Xf, yf, config.batch_size)

    def objective(theta):
        return _mse(model.with_params(theta), Xf, yf)

    def on_accept(epoch, theta, loss, mu):
        val = _mse(model.with_params(theta), Xv, yv) if n_val else loss
        report.val_mse.append(float(val))
        if val < best["val"]:
            best.update(theta=theta.copy(), val=val, epoch=epoch)
        log.debug("epoch %d train %.6g val %.6g mu %.3g", epoch, loss, val, mu)
        return n_val > 0 and epoch - best["epoch"] >= config.val_patience

    theta, report = levenberg_marquardt(model.params(), linearize, objective, config, on_accept, report)
    if not report.train_mse:
        best["theta"] = theta
    report.best_epoch = best["epoch"]
    return model.with_params(best["theta"]), report
