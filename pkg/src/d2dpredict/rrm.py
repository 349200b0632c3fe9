"""SINR capacity of D2D pairs, greedy channel allocation, greedy binary power control,
and the signaling-overhead count."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .propagation import GainMatrixSet


class Mode(str, Enum):
    SHARED = "shared"
    DEDICATED = "dedicated"


def dbm_to_w(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class RrmConfig:
    bandwidth_hz: float = 20e6
    n_channels: int = 10
    channel_bw_hz: float = 2e6
    p_max_dbm: float = 24.0
    p_min_dbm: float = 1.0
    cue_power_dbm: float = 24.0
    noise_density_dbm_hz: float = -174.0
    mode: Mode = Mode.SHARED
    max_sweeps: int = 10

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n_channels * self.channel_bw_hz > self.bandwidth_hz * (1 + 1e-12):
            raise ValueError("n_channels * channel_bw_hz exceeds the bandwidth")
        if not self.p_min_dbm < self.p_max_dbm:
            raise ValueError("p_min_dbm must be below p_max_dbm")

    @property
    def noise_w_per_hz(self) -> float:
        return float(dbm_to_w(self.noise_density_dbm_hz))

    @property
    def reuse_bw_hz(self) -> float:
        return self.channel_bw_hz if self.mode is Mode.SHARED else self.bandwidth_hz

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass(frozen=True)
class Allocation:
    pair_channels: np.ndarray  # (N,) channel index per D2D pair
    cue_channels: np.ndarray  # (M,) fixed channel per CUE

    @classmethod
    def cue_per_channel(cls, pair_channels, n_cues: int) -> Allocation:
        return cls(np.asarray(pair_channels, dtype=int), np.arange(n_cues))


@dataclass(frozen=True)
class PowerDecision:
    powers_dbm: np.ndarray  # (N,)


def _powers_w(gains: GainMatrixSet, powers: PowerDecision | None, cfg: RrmConfig) -> np.ndarray:
    if powers is None:
        return np.full(gains.n_pairs, float(dbm_to_w(cfg.p_max_dbm)))
    return dbm_to_w(powers.powers_dbm)


def pair_capacities(gains: GainMatrixSet, alloc: Allocation | None, powers: PowerDecision | None,
                    cfg: RrmConfig, active=None) -> np.ndarray:
    """Capacity (bit/s) of every pair on its channel; inactive pairs get 0 and cause no interference.

    Shared mode: pairs interfere only with co-channel pairs and the CUE(s) on
    their channel, bandwidth ``channel_bw_hz``. Dedicated mode: all pairs share
    the full band, no CUE term.
    """
    N = gains.n_pairs
    if N == 0:
        return np.zeros(0)
    active = np.ones(N, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    p = _powers_w(gains, powers, cfg) * active
    G = gains.d2d_cross()  # [q, n]
    own = np.diag(G)
    G_off = G * ~np.eye(N, dtype=bool)
    bw = cfg.reuse_bw_hz
    noise = bw * cfg.noise_w_per_hz
    if cfg.mode is Mode.SHARED:
        if alloc is None:
            raise ValueError("shared mode needs a channel allocation")
        ch = alloc.pair_channels
        same = ch[:, None] == ch[None, :]
        interf = (p[:, None] * G_off * same).sum(axis=0)
        if gains.n_cues:
            p_cue = float(dbm_to_w(cfg.cue_power_dbm))
            cue_same = alloc.cue_channels[:, None] == ch[None, :]
            interf = interf + (p_cue * gains.cue_cross() * cue_same).sum(axis=0)
    else:
        interf = (p[:, None] * G_off).sum(axis=0)
    sinr = p * own / (noise + interf)
    return np.where(active, bw * np.log2(1.0 + sinr), 0.0)


def pair_capacity(n: int, k: int, gains: GainMatrixSet, alloc: Allocation | None,
                  powers: PowerDecision | None, cfg: RrmConfig) -> float:
    """C_n^k: capacity of pair ``n`` on channel ``k`` (zero if the pair is not on ``k``).

    In dedicated mode every pair reuses the single full band, so ``k`` is ignored.
    """
    if cfg.mode is Mode.SHARED and int(alloc.pair_channels[n]) != k:
        return 0.0
    return float(pair_capacities(gains, alloc, powers, cfg)[n])


def sum_capacity(gains: GainMatrixSet, alloc: Allocation | None, powers: PowerDecision | None,
                 cfg: RrmConfig) -> float:
    return float(pair_capacities(gains, alloc, powers, cfg).sum())


def allocate_channels_greedy(gains: GainMatrixSet, cfg: RrmConfig) -> Allocation:
    """Sequential greedy channel assignment followed by single-move improvement sweeps.

    Pairs are placed in index order, each on the channel that maximizes the
    sum capacity of the pairs placed so far (ties to the lowest channel).
    Each sweep then moves any pair whose relocation raises the sum capacity,
    until a sweep changes nothing or ``cfg.max_sweeps`` is reached.
    """
    if cfg.mode is not Mode.SHARED:
        raise ValueError("channel allocation applies to shared mode")
    K, N, M = cfg.n_channels, gains.n_pairs, gains.n_cues
    if M != K:
        raise ValueError(f"expected one CUE per channel (M = K = {K}), got M = {M}")
    ch = np.zeros(N, dtype=int)
    active = np.zeros(N, dtype=bool)

    def total(channels, act):
        return pair_capacities(gains, Allocation.cue_per_channel(channels, M), None, cfg, act).sum()

    for n in range(N):
        active[n] = True
        scores = []
        for k in range(K):
            ch[n] = k
            scores.append(total(ch, active))
        ch[n] = int(np.argmax(scores))

    for _ in range(cfg.max_sweeps):
        changed = False
        for n in range(N):
            current = total(ch, active)
            keep = ch[n]
            best_k, best_val = keep, current
            for k in range(K):
                if k == keep:
                    continue
                ch[n] = k
                val = total(ch, active)
                if val > best_val:
                    best_k, best_val = k, val
            ch[n] = best_k
            changed |= best_k != keep
        if not changed:
            break
    return Allocation.cue_per_channel(ch, M)


def binary_power_control_greedy(gains: GainMatrixSet, cfg: RrmConfig) -> PowerDecision:
    """Start every pair at p_max; repeatedly apply the single p_max/p_min flip with the
    largest sum-capacity gain (ties to the lowest pair index) until no flip helps."""
    if cfg.mode is not Mode.DEDICATED:
        raise ValueError("binary power control applies to dedicated mode")
    N = gains.n_pairs
    high = np.ones(N, dtype=bool)

    def total(h):
        return sum_capacity(gains, None, PowerDecision(np.where(h, cfg.p_max_dbm, cfg.p_min_dbm)), cfg)

    current = total(high)
    while True:
        gains_by_flip = np.empty(N)
        for n in range(N):
            high[n] = ~high[n]
            gains_by_flip[n] = total(high) - current
            high[n] = ~high[n]
        if N == 0 or gains_by_flip.max() <= 0.0:
            break
        n = int(np.argmax(gains_by_flip))
        high[n] = ~high[n]
        current = total(high)
    return PowerDecision(np.where(high, cfg.p_max_dbm, cfg.p_min_dbm))


class Overhead(NamedTuple):
    total: int
    cellular: int
    reduction: int

    @property
    def ratio(self) -> float:
        return self.total / self.cellular if self.cellular else float("inf")


def signaling_overhead(L: int, N: int, M: int, mode: Mode | str = Mode.SHARED) -> Overhead:
    """Channel gains to estimate with full D2D knowledge, with prediction, and the saving."""
    if min(L, N, M) < 0:
        raise ValueError("counts must be non-negative")
    if Mode(mode) is Mode.DEDICATED:
        M = 0
    cellular = L * (2 * N + M)
    reduction = 2 * N * (2 * N - 1) + 2 * N * M
    return Overhead(cellular + reduction, cellular, reduction)
