"""Random network drops: base stations, UEs, D2D pairs and a Manhattan building grid."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

MAX_PLACEMENT_ATTEMPTS = 10_000


class ScenarioError(RuntimeError):
    """Raised when a drop cannot be placed (e.g. buildings leave no free space)."""


class Environment(str, Enum):
    RURAL = "rural"
    URBAN = "urban"


class NodeKind(str, Enum):
    BS = "BS"
    DUE_T = "DUE_T"
    DUE_R = "DUE_R"
    CUE = "CUE"


@dataclass(frozen=True)
class AreaConfig:
    side_m: float = 250.0
    n_bs: int = 3
    n_pairs: int = 4
    n_cues: int = 10
    d_max_m: float = 50.0
    environment: Environment = Environment.RURAL
    # Manhattan grid: grid_blocks x grid_blocks equal blocks, centered in the area
    grid_blocks: int = 4
    block_m: float = 40.0
    street_m: float = 20.0
    margin_m: float = 5.0
    bs_height_m: float = 10.0
    ue_height_m: float = 1.5
    building_height_range_m: tuple[float, float] = (20.0, 30.0)

    def __post_init__(self):
        object.__setattr__(self, "environment", Environment(self.environment))
        object.__setattr__(self, "building_height_range_m", tuple(float(h) for h in self.building_height_range_m))
        if self.side_m <= 0:
            raise ValueError("side_m must be positive")
        if self.d_max_m <= 0:
            raise ValueError("d_max_m must be positive")
        if self.n_bs < 1:
            raise ValueError("n_bs must be >= 1")
        if min(self.n_pairs, self.n_cues, self.grid_blocks) < 0:
            raise ValueError("counts must be non-negative")
        lo, hi = self.building_height_range_m
        if lo > hi:
            raise ValueError("building_height_range_m must be (min, max) with min <= max")
        if self.environment is Environment.URBAN and self.grid_blocks > 0:
            if self.block_m <= 0 or self.street_m < 0:
                raise ValueError("block_m must be positive and street_m non-negative")
            if self._grid_offset() < self.margin_m:
                raise ValueError("building grid does not fit inside the area with the requested margin")

    def _grid_offset(self) -> float:
        span = self.grid_blocks * self.block_m + (self.grid_blocks - 1) * self.street_m
        return (self.side_m - span) / 2.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["environment"] = self.environment.value
        d["building_height_range_m"] = list(self.building_height_range_m)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AreaConfig:
        d = dict(d)
        if "building_height_range_m" in d:
            d["building_height_range_m"] = tuple(d["building_height_range_m"])
        return cls(**d)


@dataclass(frozen=True)
class Building:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    height_m: float

    def contains_xy(self, x, y):
        """Closed-footprint membership; works on scalars or arrays."""
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)


@dataclass(frozen=True)
class Node:
    position: tuple[float, float, float]
    kind: NodeKind


@dataclass(frozen=True)
class Layout:
    """The static part of an area: buildings and base stations."""

    buildings: tuple[Building, ...]
    bs_positions: np.ndarray  # (L, 3)
    seed: int


@dataclass(frozen=True)
class Scenario:
    config: AreaConfig
    buildings: tuple[Building, ...]
    bss: tuple[Node, ...]
    dues: tuple[Node, ...]
    cues: tuple[Node, ...]
    seed: int
    layout_seed: int | None = None

    @property
    def n_pairs(self) -> int:
        return len(self.dues) // 2

    @property
    def ues(self) -> tuple[Node, ...]:
        """All UEs in matrix order: DUEs (T, R per pair) then CUEs."""
        return self.dues + self.cues

    def bs_array(self) -> np.ndarray:
        return np.array([n.position for n in self.bss], dtype=float).reshape(-1, 3)

    def ue_array(self) -> np.ndarray:
        return np.array([n.position for n in self.ues], dtype=float).reshape(-1, 3)

    def pair_index(self, n: int) -> tuple[int, int]:
        return pair_index(n, self.n_pairs)

    def layout(self) -> Layout:
        return Layout(self.buildings, self.bs_array(), self.layout_seed if self.layout_seed is not None else self.seed)

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "d2dpredict-scenario",
            "version": 1,
            "seed": self.seed,
            "layout_seed": self.layout_seed,
            "config": self.config.to_dict(),
            "buildings": [asdict(b) for b in self.buildings],
            "nodes": [{"kind": n.kind.value, "position": list(n.position)} for n in self.bss + self.dues + self.cues],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        if d.get("format") != "d2dpredict-scenario":
            raise ValueError("not a scenario document")
        nodes = [Node(tuple(float(v) for v in n["position"]), NodeKind(n["kind"])) for n in d["nodes"]]
        return cls(
            config=AreaConfig.from_dict(d["config"]),
            buildings=tuple(Building(**b) for b in d["buildings"]),
            bss=tuple(n for n in nodes if n.kind is NodeKind.BS),
            dues=tuple(n for n in nodes if n.kind in (NodeKind.DUE_T, NodeKind.DUE_R)),
            cues=tuple(n for n in nodes if n.kind is NodeKind.CUE),
            seed=d["seed"],
            layout_seed=d.get("layout_seed"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> Scenario:
        return cls.from_dict(json.loads(Path(path).read_text()))


def pair_index(n: int, n_pairs: int) -> tuple[int, int]:
    """Indices of (DUE_T, DUE_R) of pair ``n`` in the DUE list."""
    if not 0 <= n < n_pairs:
        raise IndexError(f"pair id {n} out of range [0, {n_pairs})")
    return 2 * n, 2 * n + 1


def manhattan_grid(config: AreaConfig, rng: np.random.Generator) -> tuple[Building, ...]:
    if config.environment is Environment.RURAL or config.grid_blocks == 0:
        return ()
    lo, hi = config.building_height_range_m
    offset = config._grid_offset()
    pitch = config.block_m + config.street_m
    n = config.grid_blocks
    heights = rng.uniform(lo, hi, size=n * n)
    buildings = []
    for row in range(n):
        for col in range(n):
            x0 = offset + col * pitch
            y0 = offset + row * pitch
            buildings.append(Building(x0, x0 + config.block_m, y0, y0 + config.block_m, float(heights[row * n + col])))
    return tuple(buildings)


def inside_any(buildings, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hit = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for b in buildings:
        hit |= b.contains_xy(x, y)
    return hit


def sample_free_points(n: int, config: AreaConfig, buildings, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the area minus building footprints, as (n, 2)."""
    out = np.empty((n, 2))
    filled = 0
    attempts = 0
    while filled < n:
        need = n - filled
        pts = rng.uniform(0.0, config.side_m, size=(need, 2))
        ok = ~inside_any(buildings, pts[:, 0], pts[:, 1])
        good = pts[ok]
        out[filled:filled + len(good)] = good
        filled += len(good)
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise ScenarioError("could not place nodes outside buildings; area is too crowded")
    return out


def generate_layout(config: AreaConfig, seed: int) -> Layout:
    rng = np.random.default_rng([seed, 0])
    buildings = manhattan_grid(config, rng)
    xy = sample_free_points(config.n_bs, config, buildings, rng)
    bs = np.column_stack([xy, np.full(config.n_bs, config.bs_height_m)])
    return Layout(buildings, bs, seed)


def _place_receiver(tx_xy, config: AreaConfig, buildings, rng: np.random.Generator) -> np.ndarray:
    for _ in range(MAX_PLACEMENT_ATTEMPTS):
        r = config.d_max_m * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * np.pi)
        x = tx_xy[0] + r * np.cos(phi)
        y = tx_xy[1] + r * np.sin(phi)
        if 0.0 <= x <= config.side_m and 0.0 <= y <= config.side_m and not inside_any(buildings, x, y):
            return np.array([x, y])
    raise ScenarioError("could not place a D2D receiver within d_max of its transmitter")


def generate_scenario(config: AreaConfig, seed: int, layout: Layout | None = None) -> Scenario:
    """Draw one network drop.

    When ``layout`` is given, buildings and BS positions are taken from it and
    only the UEs are random; this is how drops are generated for an area a
    model was trained on.
    """
    if layout is None:
        layout = generate_layout(config, seed)
    if len(layout.bs_positions) != config.n_bs:
        raise ValueError("layout BS count does not match config.n_bs")
    rng = np.random.default_rng([seed, 1])
    buildings = layout.buildings
    z_ue = config.ue_height_m

    dues = []
    for _ in range(config.n_pairs):
        tx = sample_free_points(1, config, buildings, rng)[0]
        rx = _place_receiver(tx, config, buildings, rng)
        dues.append(Node((float(tx[0]), float(tx[1]), z_ue), NodeKind.DUE_T))
        dues.append(Node((float(rx[0]), float(rx[1]), z_ue), NodeKind.DUE_R))
    cue_xy = sample_free_points(config.n_cues, config, buildings, rng)
    cues = [Node((float(x), float(y), z_ue), NodeKind.CUE) for x, y in cue_xy]
    bss = [Node(tuple(float(v) for v in p), NodeKind.BS) for p in layout.bs_positions]
    return Scenario(config, tuple(buildings), tuple(bss), tuple(dues), tuple(cues), seed, layout.seed)


# geometry ---------------------------------------------------------------

def _building_arrays(buildings):
    arr = np.array([[b.x_min, b.x_max, b.y_min, b.y_max, b.height_m] for b in buildings], dtype=float)
    return arr.reshape(-1, 5)


def wall_crossings_many(a, b, buildings) -> np.ndarray:
    """Vectorized wall count for segments ``a[s] -> b[s]`` (arrays of shape (S, 3)).

    A vertical face counts when the open segment crosses it strictly inside the
    face's horizontal extent and strictly below the roof. Grazing contacts
    (corners, edges, segments lying in a face plane, exactly at roof height)
    do not count.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    count = np.zeros(len(a), dtype=np.int64)
    if not buildings:
        return count
    bld = _building_arrays(buildings)
    d = b - a
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # faces x = const, extent along y
        for axis, other, cols in ((0, 1, (0, 1, 2, 3)), (1, 0, (2, 3, 0, 1))):
            lo_face, hi_face, lo_ext, hi_ext = cols
            da = d[:, axis][:, None]
            for face_col in (lo_face, hi_face):
                plane = bld[:, face_col][None, :]
                t = (plane - a[:, axis][:, None]) / da
                along = a[:, other][:, None] + t * d[:, other][:, None]
                z = a[:, 2][:, None] + t * d[:, 2][:, None]
                hit = (
                    (da != 0)
                    & (t > 0.0) & (t < 1.0)
                    & (along > bld[:, lo_ext][None, :]) & (along < bld[:, hi_ext][None, :])
                    & (z < bld[:, 4][None, :])
                )
                count += hit.sum(axis=1)
    return count


def wall_crossings(a, b, buildings) -> int:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints must differ")
    return int(wall_crossings_many(a[None, :], b[None, :], buildings)[0])
