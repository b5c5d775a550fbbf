"""Statistically controlled urban layouts.

Four families share the same built-up parameters (alpha, beta, gamma) and
differ only in how buildings are arranged:

* ``manhattan`` - identical square buildings on a regular street grid
* ``sru``       - Manhattan grid cells holding randomly sized footprints
* ``fuu``       - Dirichlet-split areas dropped at random free positions
* ``heu``       - FUU with highway corridors kept free of buildings

All footprints are axis-aligned rectangles.  Random placement is checked
against a 1 m occupancy grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import CellOverflow, HighwayTooLarge, NonPositiveStreet, PlacementExhausted
from .seeding import substream
from .tables import BUILT_UP, Env, LayoutKind

GRID_RES_M = 1.0
PLACEMENT_TRIES = 1000
ASPECT_REDRAWS = 10
ASPECT_MIN, ASPECT_MAX = 0.25, 4.0
SRU_STREET_MARGIN_M = 1.0
# half-diagonal of a grid cell: dilating a shape by this much makes the
# center-inside test catch every cell the shape touches
_CELL_HALF_DIAG = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class BuiltUpParams:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta < 1:
            raise ValueError(f"beta must be >= 1, got {self.beta}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @classmethod
    def for_env(cls, env: "str | Env") -> "BuiltUpParams":
        return cls(*BUILT_UP[Env.parse(env)])

    @property
    def avg_building_area(self) -> float:
        """B_avg in m^2 (independent of the simulated area)."""
        return self.alpha * 1e6 / self.beta

    def to_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma}


def as_params(env: "BuiltUpParams | Env | str") -> BuiltUpParams:
    if isinstance(env, BuiltUpParams):
        return env
    return BuiltUpParams.for_env(env)


@dataclass(frozen=True)
class Building:
    x: float
    y: float
    width: float
    length: float
    height: float

    @property
    def x1(self) -> float:
        return self.x + self.width

    @property
    def y1(self) -> float:
        return self.y + self.length

    @property
    def area(self) -> float:
        return self.width * self.length


@dataclass(frozen=True)
class Highway:
    """Straight corridor; ``(x, y)`` is its center, ``phi`` the direction of its length."""

    x: float
    y: float
    width: float
    length: float
    phi: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.length <= 0:
            raise ValueError("highway width and length must be positive")
        if not 0.0 <= self.phi < math.pi:
            raise ValueError(f"highway orientation must lie in [0, pi), got {self.phi}")

    @property
    def area(self) -> float:
        return self.width * self.length

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.phi), math.sin(self.phi)
        along = np.array([c, s]) * self.length / 2
        across = np.array([-s, c]) * self.width / 2
        center = np.array([self.x, self.y])
        return np.array([center - along - across, center + along - across,
                         center + along + across, center - along + across])


def default_highways(area: float, n: int = 2, width: float = 40.0) -> list[Highway]:
    """Full-length corridors through the center, alternating between 0 and pi/2."""
    phis = [0.0, math.pi / 2]
    return [Highway(area / 2, area / 2, width, area, phis[j % 2]) for j in range(n)]


@dataclass
class CityLayout:
    area_m: float
    kind: LayoutKind
    env: BuiltUpParams
    buildings: list[Building]
    highways: list[Highway] = field(default_factory=list)
    seed: int | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def footprints(self) -> np.ndarray:
        """``(n, 5)`` array of ``x0, y0, x1, y1, height``."""
        if not self.buildings:
            return np.zeros((0, 5))
        return np.array([(b.x, b.y, b.x1, b.y1, b.height) for b in self.buildings], dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "area_m": self.area_m,
            "seed": self.seed,
            "env": self.env.to_dict(),
            "buildings": [{"x": b.x, "y": b.y, "w": b.width, "l": b.length, "h": b.height}
                          for b in self.buildings],
            "highways": [{"x": h.x, "y": h.y, "w": h.width, "l": h.length, "phi": h.phi}
                         for h in self.highways],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CityLayout":
        return cls(
            area_m=float(d["area_m"]),
            kind=LayoutKind.parse(d["kind"]),
            env=BuiltUpParams(**d["env"]),
            buildings=[Building(b["x"], b["y"], b["w"], b["l"], b["h"]) for b in d["buildings"]],
            highways=[Highway(h["x"], h["y"], h["w"], h["l"], h["phi"]) for h in d.get("highways", [])],
            seed=d.get("seed"),
            meta=dict(d.get("meta", {})),
        )


def write_layout(layout: CityLayout, path: "str | Path", extra: dict | None = None) -> None:
    d = layout.to_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(d, indent=1) + "\n")


def read_layout(path: "str | Path") -> CityLayout:
    return CityLayout.from_dict(json.loads(Path(path).read_text()))


# -- sampling primitives ----------------------------------------------------

def manhattan_dims(params: BuiltUpParams) -> tuple[float, float]:
    """Building side ``W`` and street width ``S`` in meters."""
    w = 1000.0 * math.sqrt(params.alpha / params.beta)
    s = 1000.0 * math.sqrt(1.0 / params.beta) - w
    if s <= 0:
        raise NonPositiveStreet(f"street width {s:.3f} m is not positive for {params}")
    return w, s


def sample_height(gamma: float, rng: np.random.Generator, size: int | None = None):
    """Rayleigh building heights by inverse CDF; zero draws are resampled."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    n = 1 if size is None else int(size)
    u = rng.random(n)
    bad = u == 0.0
    while bad.any():
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    h = gamma * np.sqrt(-2.0 * np.log1p(-u))
    return float(h[0]) if size is None else h


def sru_footprint(b_avg: float, r):
    """Area, width and length of an SRU building for uniform draw(s) ``r``."""
    r = np.asarray(r, dtype=float)
    area = b_avg * (0.6 + 0.8 * r)
    width = np.sqrt(area) * (0.5 + r)
    return area, width, area / width


def dirichlet_areas(n: int, total: float, rng: np.random.Generator) -> np.ndarray:
    """Split ``total`` into ``n`` parts drawn from a flat Dirichlet."""
    e = rng.standard_exponential(n)
    return e / e.sum() * total


def _split_area(area: float, r: float) -> tuple[float, float]:
    w = math.sqrt(area) * (0.5 + r)
    l = area / w
    aspect = w / l
    if aspect < ASPECT_MIN or aspect > ASPECT_MAX:
        aspect = min(max(aspect, ASPECT_MIN), ASPECT_MAX)
        w = math.sqrt(area * aspect)
        l = area / w
    return w, l


def _nominal_count(params: BuiltUpParams, area: float) -> float:
    return params.beta * area * area / 1e6


# -- occupancy grid ---------------------------------------------------------

class OccupancyGrid:
    """Boolean raster over the square area at :data:`GRID_RES_M` resolution.

    Footprints mark every cell they touch, so two footprints that pass the
    free-cell check can never overlap.
    """

    def __init__(self, area: float):
        self.area = area
        self.n = int(math.ceil(area / GRID_RES_M))
        self.cells = np.zeros((self.n, self.n), dtype=bool)

    def _span(self, lo: float, hi: float) -> tuple[int, int]:
        return max(int(math.floor(lo / GRID_RES_M)), 0), min(int(math.ceil(hi / GRID_RES_M)), self.n)

    def is_free(self, x: float, y: float, w: float, l: float) -> bool:
        i0, i1 = self._span(x, x + w)
        j0, j1 = self._span(y, y + l)
        return not self.cells[i0:i1, j0:j1].any()

    def mark(self, x: float, y: float, w: float, l: float) -> None:
        i0, i1 = self._span(x, x + w)
        j0, j1 = self._span(y, y + l)
        self.cells[i0:i1, j0:j1] = True

    def mark_highway(self, hw: Highway) -> int:
        """Mark every cell a corridor covers; returns the number of newly marked cells."""
        pts = hw.corners()
        m = _CELL_HALF_DIAG
        i0, i1 = self._span(pts[:, 0].min() - m, pts[:, 0].max() + m)
        j0, j1 = self._span(pts[:, 1].min() - m, pts[:, 1].max() + m)
        if i1 <= i0 or j1 <= j0:
            return 0
        cx = (np.arange(i0, i1) + 0.5)[:, None] * GRID_RES_M - hw.x
        cy = (np.arange(j0, j1) + 0.5)[None, :] * GRID_RES_M - hw.y
        c, s = math.cos(hw.phi), math.sin(hw.phi)
        u = cx * c + cy * s
        v = -cx * s + cy * c
        inside = (np.abs(u) <= hw.length / 2 + m) & (np.abs(v) <= hw.width / 2 + m)
        block = self.cells[i0:i1, j0:j1]
        new = int((inside & ~block).sum())
        block |= inside
        return new


# -- generators -------------------------------------------------------------

def generate_manhattan(env, area: float, rng: np.random.Generator) -> CityLayout:
    params = as_params(env)
    w, s = manhattan_dims(params)
    pitch = w + s
    n = int(math.floor(area / pitch + 1e-9))
    heights = sample_height(params.gamma, rng, n * n)
    buildings = [Building(i * pitch + s / 2, j * pitch + s / 2, w, w, float(heights[i * n + j]))
                 for i in range(n) for j in range(n)]
    meta = {"effective_count": n * n, "nominal_count": _nominal_count(params, area),
            "shrink_events": 0, "width_m": w, "street_m": s}
    return CityLayout(area, LayoutKind.MANHATTAN, params, buildings, meta=meta)


def generate_sru(env, area: float, rng: np.random.Generator, on_overflow: str = "shrink") -> CityLayout:
    """Random SRU footprints centered in the Manhattan grid cells.

    A footprint whose side exceeds the cell minus a 1 m street margin is
    shrunk isotropically (``on_overflow="shrink"``) or rejected with
    :class:`CellOverflow` (``on_overflow="raise"``).
    """
    params = as_params(env)
    w, s = manhattan_dims(params)
    pitch = w + s
    n = int(math.floor(area / pitch + 1e-9))
    r = rng.random(n * n)
    heights = sample_height(params.gamma, rng, n * n)
    _, widths, lengths = sru_footprint(params.avg_building_area, r)
    limit = pitch - SRU_STREET_MARGIN_M
    shrink = 0
    buildings = []
    for k in range(n * n):
        bw, bl = float(widths[k]), float(lengths[k])
        big = max(bw, bl)
        if big > limit:
            if on_overflow == "raise":
                raise CellOverflow(f"footprint {bw:.2f} x {bl:.2f} m exceeds cell limit {limit:.2f} m")
            bw, bl = bw * limit / big, bl * limit / big
            shrink += 1
        i, j = divmod(k, n)
        buildings.append(Building(i * pitch + (pitch - bw) / 2, j * pitch + (pitch - bl) / 2,
                                  bw, bl, float(heights[k])))
    meta = {"effective_count": n * n, "nominal_count": _nominal_count(params, area),
            "shrink_events": shrink}
    return CityLayout(area, LayoutKind.SRU, params, buildings, meta=meta)


def _place_random(params: BuiltUpParams, area: float, built_area: float,
                  grid: OccupancyGrid, rng: np.random.Generator) -> list[Building]:
    n = max(int(round(_nominal_count(params, area))), 1)
    areas = dirichlet_areas(n, built_area, rng)
    r = rng.random(n)
    heights = sample_height(params.gamma, rng, n)
    placed = []
    # largest first: small footprints fill the gaps left by large ones
    for k in np.argsort(-areas, kind="stable"):
        a = float(areas[k])
        rk = float(r[k])
        for attempt in range(ASPECT_REDRAWS + 1):
            if attempt:
                rk = float(rng.random())
            bw, bl = _split_area(a, rk)
            if bw > area or bl > area:
                continue
            xs = rng.random(PLACEMENT_TRIES) * (area - bw)
            ys = rng.random(PLACEMENT_TRIES) * (area - bl)
            spot = next((t for t in range(PLACEMENT_TRIES) if grid.is_free(xs[t], ys[t], bw, bl)), None)
            if spot is not None:
                x, y = float(xs[spot]), float(ys[spot])
                grid.mark(x, y, bw, bl)
                placed.append(Building(x, y, bw, bl, float(heights[k])))
                break
        else:
            raise PlacementExhausted(
                f"could not place building of {a:.1f} m^2 ({len(placed)}/{n} placed)")
    return placed


def generate_fuu(env, area: float, rng: np.random.Generator) -> CityLayout:
    params = as_params(env)
    built = params.alpha * area * area
    buildings = _place_random(params, area, built, OccupancyGrid(area), rng)
    meta = {"effective_count": len(buildings), "nominal_count": _nominal_count(params, area),
            "shrink_events": 0, "built_area_m2": built}
    return CityLayout(area, LayoutKind.FUU, params, buildings, meta=meta)


def generate_heu(env, area: float, highways: Sequence[Highway] | None,
                 rng: np.random.Generator) -> CityLayout:
    params = as_params(env)
    if highways is None:
        highways = default_highways(area)
    highways = list(highways)
    total = area * area
    built = params.alpha * total
    hw_area = sum(h.area for h in highways)
    if hw_area >= total - built or hw_area >= built:
        raise HighwayTooLarge(f"highway area {hw_area:.0f} m^2 leaves no room "
                              f"(built {built:.0f}, open {total - built:.0f})")
    tol = 1e-6 * area
    for h in highways:
        c = h.corners()
        if c.min() < -tol or c.max() > area + tol:
            raise ValueError(f"highway {h} extends outside the {area} m area")
    grid = OccupancyGrid(area)
    raster = sum(grid.mark_highway(h) for h in highways)
    effective = built - hw_area
    buildings = _place_random(params, area, effective, grid, rng)
    meta = {"effective_count": len(buildings), "nominal_count": _nominal_count(params, area),
            "shrink_events": 0, "built_area_m2": built, "highway_area_m2": hw_area,
            "effective_built_area_m2": effective, "highway_cells": raster}
    return CityLayout(area, LayoutKind.HEU, params, buildings, list(highways), meta=meta)


def generate(kind: "str | LayoutKind", env, area: float, rng: np.random.Generator,
             highways: Sequence[Highway] | None = None) -> CityLayout:
    kind = LayoutKind.parse(kind)
    if kind is LayoutKind.MANHATTAN:
        return generate_manhattan(env, area, rng)
    if kind is LayoutKind.SRU:
        return generate_sru(env, area, rng)
    if kind is LayoutKind.FUU:
        return generate_fuu(env, area, rng)
    if kind is LayoutKind.HEU:
        return generate_heu(env, area, highways, rng)
    raise ValueError(f"{kind.value!r} is not a geometric layout")


def generate_layout(kind, env, area: float, seed: int, index: Iterable[int] = (0,),
                    highways: Sequence[Highway] | None = None) -> CityLayout:
    """Seeded entry point: the layout depends only on ``(kind, env, area, seed, index)``."""
    layout = generate(kind, env, area, substream(seed, "urbgen", *index), highways)
    layout.seed = seed
    return layout
