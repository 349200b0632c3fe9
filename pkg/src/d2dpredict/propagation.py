"""Average channel gains from geometry: LOS path loss plus a fixed penalty per crossed wall."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .scenario import Node, Scenario, wall_crossings_many

D_FLOOR_M = 1.0
GAIN_FLOOR = 1e-30


@dataclass(frozen=True)
class RadioParams:
    fc_hz: float = 2e9
    wall_loss_db: float = 10.0
    noise_density_dbm_hz: float = -174.0

    def __post_init__(self):
        if self.fc_hz <= 0:
            raise ValueError("fc_hz must be positive")
        if self.wall_loss_db < 0:
            raise ValueError("wall_loss_db must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GainMatrixSet:
    """Linear gains for one drop.

    ``cellular[i, l]`` is UE i to BS l, ``d2d[i, j]`` UE i to UE j. UEs are
    ordered as in :attr:`Scenario.ues` (DUE_T/DUE_R per pair, then CUEs). The
    d2d diagonal is unused and holds 1.0.
    """

    cellular: np.ndarray
    d2d: np.ndarray
    n_pairs: int
    n_cues: int

    def direct(self) -> np.ndarray:
        """g_{n,n}: DUE_T(n) -> DUE_R(n), shape (N,)."""
        n = np.arange(self.n_pairs)
        return self.d2d[2 * n, 2 * n + 1]

    def d2d_cross(self) -> np.ndarray:
        """g_{q,n}: DUE_T(q) -> DUE_R(n), shape (N, N); diagonal equals direct()."""
        n = np.arange(self.n_pairs)
        return self.d2d[np.ix_(2 * n, 2 * n + 1)]

    def cue_cross(self) -> np.ndarray:
        """g_{m,n}: CUE m -> DUE_R(n), shape (M, N)."""
        n = np.arange(self.n_pairs)
        m = 2 * self.n_pairs + np.arange(self.n_cues)
        return self.d2d[np.ix_(m, 2 * n + 1)]

    def scaled(self, c: float) -> GainMatrixSet:
        d2d = self.d2d * c
        np.fill_diagonal(d2d, 1.0)
        return GainMatrixSet(self.cellular * c, d2d, self.n_pairs, self.n_cues)


def los_pathloss_db(d_m, fc_hz: float = 2e9):
    """Free-space path loss in dB; distances below 1 m are clamped to 1 m."""
    d = np.maximum(np.asarray(d_m, dtype=float), D_FLOOR_M)
    pl = 20.0 * np.log10(d) + 20.0 * np.log10(fc_hz) - 147.55
    return float(pl) if pl.ndim == 0 else pl


def gain_from_pathloss(pl_db):
    g = np.power(10.0, -np.asarray(pl_db, dtype=float) / 10.0)
    return float(g) if g.ndim == 0 else g


def pathloss_from_gain(g):
    pl = -10.0 * np.log10(np.asarray(g, dtype=float))
    return float(pl) if pl.ndim == 0 else pl


def segment_pathloss_db(a, b, buildings, radio: RadioParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Path loss, distance and wall count for segments a[s] -> b[s]."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    dist = np.linalg.norm(b - a, axis=1)
    walls = wall_crossings_many(a, b, buildings)
    pl = los_pathloss_db(dist, radio.fc_hz) + radio.wall_loss_db * walls
    return np.atleast_1d(pl), dist, walls


def link_pathloss_db(a: Node, b: Node, scenario: Scenario, radio: RadioParams = RadioParams()) -> float:
    if a.position == b.position:
        raise ValueError("link endpoints must differ")
    pl, _, _ = segment_pathloss_db(a.position, b.position, scenario.buildings, radio)
    return float(pl[0])


def _link_tables(scenario: Scenario, radio: RadioParams):
    ues = scenario.ue_array()
    bss = scenario.bs_array()
    U, L = len(ues), len(bss)
    ii, ll = np.meshgrid(np.arange(U), np.arange(L), indexing="ij")
    cell = segment_pathloss_db(ues[ii.ravel()], bss[ll.ravel()], scenario.buildings, radio) if U else None
    iu, ju = np.triu_indices(U, k=1)
    d2d = segment_pathloss_db(ues[iu], ues[ju], scenario.buildings, radio) if len(iu) else None
    return (ii.ravel(), ll.ravel(), cell), (iu, ju, d2d)


def compute_gain_matrices(scenario: Scenario, radio: RadioParams = RadioParams()) -> GainMatrixSet:
    U = len(scenario.ues)
    L = len(scenario.bss)
    (ii, ll, cell), (iu, ju, d2d) = _link_tables(scenario, radio)
    cellular = np.empty((U, L))
    if cell is not None:
        cellular[ii, ll] = gain_from_pathloss(cell[0])
    g = np.ones((U, U))
    if d2d is not None:
        gains = gain_from_pathloss(d2d[0])
        g[iu, ju] = gains
        g[ju, iu] = gains
    return GainMatrixSet(cellular, g, scenario.n_pairs, len(scenario.cues))


def apply_estimation_noise(g, snr_g_db: float, rng: np.random.Generator):
    """Additive Gaussian estimation error with std ``g / 10**(snr_g_db/10)``.

    ``snr_g_db = inf`` disables the noise. Results are floored at 1e-30 so
    that path losses stay finite.
    """
    g = np.asarray(g, dtype=float)
    if np.isinf(snr_g_db) and snr_g_db > 0:
        out = g.copy()
    else:
        std = g / 10.0 ** (snr_g_db / 10.0)
        out = np.maximum(g + std * rng.standard_normal(g.shape), GAIN_FLOOR)
    return float(out) if out.ndim == 0 else out


def export_links_csv(scenario: Scenario, path, radio: RadioParams = RadioParams(), manifest: str | None = None) -> None:
    """One row per link: kind, i, j (UE index or BS index), distance, walls, pl_db, gain."""
    (ii, ll, cell), (iu, ju, d2d) = _link_tables(scenario, radio)
    with open(Path(path), "w", newline="") as fh:
        if manifest:
            fh.write(manifest + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "i", "j", "distance_m", "walls", "pl_db", "gain"])
        if cell is not None:
            for k in range(len(ii)):
                w.writerow(["cellular", ii[k], ll[k], repr(float(cell[1][k])), int(cell[2][k]),
                            repr(float(cell[0][k])), repr(gain_from_pathloss(float(cell[0][k])))])
        if d2d is not None:
            for k in range(len(iu)):
                w.writerow(["d2d", iu[k], ju[k], repr(float(d2d[1][k])), int(d2d[2][k]),
                            repr(float(d2d[0][k])), repr(gain_from_pathloss(float(d2d[0][k])))])
