"""Link geometry, geometric line-of-sight and Monte Carlo LoS campaigns."""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np

from .errors import DegenerateLink, EmptyDataset, EndpointInsideBuilding
from .seeding import substream
from .tables import Env, LayoutKind
from .urbgen import CityLayout, Highway, generate

DEFAULT_BIN_WIDTH = math.pi / 90  # 2 degrees
DEFAULT_MIN_BIN_COUNT = 50
INDEX_CELL_M = 50.0
_CHUNK_ELEMS = 1 << 21


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"z must be non-negative, got {self.z}")


@dataclass(frozen=True)
class Link:
    abs: Position3D
    gu: Position3D
    r: float
    d: float
    theta: float


@dataclass(frozen=True)
class LinkSample:
    link: Link
    los: bool
    pathloss_db: float | None = None
    city_id: int = 0
    height_index: int = 0


def link_geometry(abs_pos: Position3D, gu: Position3D) -> Link:
    dz = abs_pos.z - gu.z
    if dz <= 0:
        raise DegenerateLink(f"ABS height {abs_pos.z} must exceed GU height {gu.z}")
    r = math.hypot(abs_pos.x - gu.x, abs_pos.y - gu.y)
    return Link(abs_pos, gu, r, math.hypot(r, dz), math.atan2(dz, r))


def geometry_arrays(abs_xyz, gu_xyz) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``(r, d, theta)`` for broadcastable ``(..., 3)`` endpoint arrays."""
    a = np.asarray(abs_xyz, dtype=float)
    g = np.asarray(gu_xyz, dtype=float)
    dz = a[..., 2] - g[..., 2]
    if np.any(dz <= 0):
        raise DegenerateLink("every ABS must be above its GU")
    r = np.hypot(a[..., 0] - g[..., 0], a[..., 1] - g[..., 1])
    return r, np.hypot(r, dz), np.arctan2(dz, r)


# -- segment / prism intersection ------------------------------------------

def _slab(p0: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Broadcasting slab kernel over a trailing xyz axis."""
    par = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.where(par, 1.0, d)
        t1 = (lo - p0) * inv
        t2 = (hi - p0) * inv
    tn = np.where(par, -np.inf, np.minimum(t1, t2))
    tf = np.where(par, np.inf, np.maximum(t1, t2))
    # a segment parallel to a slab misses unless strictly inside it
    outside = par & ((p0 <= lo) | (p0 >= hi))
    t_in = np.maximum(tn.max(axis=-1), 0.0)
    t_out = np.minimum(tf.min(axis=-1), 1.0)
    return (t_in < t_out) & ~outside.any(axis=-1)


def _prism_bounds(boxes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.stack([boxes[:, 0], boxes[:, 1], np.zeros(len(boxes))], axis=-1)
    hi = np.stack([boxes[:, 2], boxes[:, 3], boxes[:, 4]], axis=-1)
    return lo, hi


def segment_hits(p0: np.ndarray, p1: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Slab test of segments ``p0[i]->p1[i]`` against prisms ``boxes[k]``.

    ``boxes`` rows are ``x0, y0, x1, y1, height`` (base at z=0).  Returns an
    ``(m, k)`` boolean array, true where the open segment passes through the
    prism interior over a positive length.
    """
    a = np.atleast_2d(np.asarray(p0, dtype=float))
    d = np.atleast_2d(np.asarray(p1, dtype=float)) - a
    lo, hi = _prism_bounds(boxes)
    return _slab(a[:, None, :], d[:, None, :], lo[None], hi[None])


def inside_footprints(points_xy: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """True where a 2D point lies in (or on the edge of) any footprint."""
    pts = np.atleast_2d(points_xy)
    out = np.zeros(len(pts), dtype=bool)
    if len(boxes) == 0:
        return out
    step = max(_CHUNK_ELEMS // max(len(boxes), 1), 1)
    for s in range(0, len(pts), step):
        p = pts[s:s + step, None, :]
        out[s:s + step] = ((p[..., 0] >= boxes[:, 0]) & (p[..., 0] <= boxes[:, 2])
                           & (p[..., 1] >= boxes[:, 1]) & (p[..., 1] <= boxes[:, 3])).any(axis=1)
    return out


def _inside_volume(p: np.ndarray, boxes: np.ndarray) -> bool:
    return bool(((p[0] >= boxes[:, 0]) & (p[0] <= boxes[:, 2]) & (p[1] >= boxes[:, 1])
                 & (p[1] <= boxes[:, 3]) & (p[2] <= boxes[:, 4])).any())


class FootprintIndex:
    """Uniform-grid bucket index of building footprints."""

    def __init__(self, boxes: np.ndarray, cell: float = INDEX_CELL_M):
        self.boxes = boxes
        self.cell = cell
        self.max_height = float(boxes[:, 4].max()) if len(boxes) else 0.0
        self.buckets: dict[tuple[int, int], list[int]] = {}
        for k, (x0, y0, x1, y1, _) in enumerate(boxes):
            for i in range(int(x0 // cell), int(x1 // cell) + 1):
                for j in range(int(y0 // cell), int(y1 // cell) + 1):
                    self.buckets.setdefault((i, j), []).append(k)

    def candidates(self, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
        """Buildings that could meet the part of the segment below the tallest roof."""
        z0, z1 = p0[2], p1[2]
        top = self.max_height
        if min(z0, z1) >= top:
            return np.zeros(0, dtype=int)
        ta, tb = 0.0, 1.0
        if z0 != z1:
            t_top = (top - z0) / (z1 - z0)
            if z1 > z0:
                tb = min(t_top, 1.0)
            else:
                ta = max(t_top, 0.0)
        a = p0[:2] + ta * (p1[:2] - p0[:2])
        b = p0[:2] + tb * (p1[:2] - p0[:2])
        c = self.cell
        found: set[int] = set()
        for i in range(int(min(a[0], b[0]) // c), int(max(a[0], b[0]) // c) + 1):
            for j in range(int(min(a[1], b[1]) // c), int(max(a[1], b[1]) // c) + 1):
                found.update(self.buckets.get((i, j), ()))
        return np.fromiter(sorted(found), dtype=int, count=len(found))


_index_cache: dict[int, tuple[CityLayout, np.ndarray, FootprintIndex]] = {}


def _indexed(layout: CityLayout) -> tuple[np.ndarray, FootprintIndex]:
    hit = _index_cache.get(id(layout))
    if hit is not None and hit[0] is layout:
        return hit[1], hit[2]
    boxes = layout.footprints
    idx = FootprintIndex(boxes)
    _index_cache.clear()
    _index_cache[id(layout)] = (layout, boxes, idx)
    return boxes, idx


def is_los(layout: CityLayout, abs_pos: Position3D, gu: Position3D) -> bool:
    """Geometric visibility between two points above/among the layout's prisms."""
    boxes, idx = _indexed(layout)
    p0 = np.array([abs_pos.x, abs_pos.y, abs_pos.z])
    p1 = np.array([gu.x, gu.y, gu.z])
    if len(boxes) == 0:
        return True
    for p in (p0, p1):
        if _inside_volume(p, boxes):
            raise EndpointInsideBuilding(f"endpoint {tuple(p)} lies inside a building")
    cand = idx.candidates(p0, p1)
    if len(cand) == 0:
        return True
    return not segment_hits(p0, p1, boxes[cand]).any()


def los_mask(boxes: np.ndarray, abs_xyz, gu_xyz: np.ndarray) -> np.ndarray:
    """LoS flags for one ABS and many GUs below it (no endpoint validation).

    Pairs are pre-screened by the bounding box of the part of each segment
    that lies below the roof, then confirmed with the slab test.
    """
    gu = np.atleast_2d(np.asarray(gu_xyz, dtype=float))
    a = np.asarray(abs_xyz, dtype=float)
    if len(boxes) == 0 or len(gu) == 0:
        return np.ones(len(gu), dtype=bool)
    blocked = np.zeros(len(gu), dtype=bool)
    dz = a[2] - gu[:, 2]
    step = max(_CHUNK_ELEMS // len(gu), 1)
    for s in range(0, len(boxes), step):
        b = boxes[s:s + step]
        # fraction of the way from ABS to GU where the segment dips below each roof
        t0 = np.clip((a[2] - b[None, :, 4]) / dz[:, None], 0.0, 1.0)
        sx = a[0] + t0 * (gu[:, 0:1] - a[0])
        sy = a[1] + t0 * (gu[:, 1:2] - a[1])
        gx, gy = gu[:, 0:1], gu[:, 1:2]
        cand = ((np.minimum(sx, gx) <= b[:, 2]) & (np.maximum(sx, gx) >= b[:, 0])
                & (np.minimum(sy, gy) <= b[:, 3]) & (np.maximum(sy, gy) >= b[:, 1]))
        cand &= ~blocked[:, None]
        ii, kk = np.nonzero(cand)
        if len(ii) == 0:
            continue
        hits = _pair_hits(np.broadcast_to(a, (len(ii), 3)), gu[ii], b[kk])
        blocked[ii[hits]] = True
    return ~blocked


def _pair_hits(p0: np.ndarray, p1: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Row-wise slab test: segment ``i`` against prism ``i``."""
    lo, hi = _prism_bounds(boxes)
    return _slab(p0, p1 - p0, lo, hi)


# -- datasets ---------------------------------------------------------------

BASE_COLUMNS = ("height_m", "city_id", "abs_x", "abs_y", "gu_x", "gu_y", "r_m", "d_m", "theta_rad", "los")
INT_COLUMNS = {"city_id", "los", "los_model", "n_los", "n_total", "count"}


@dataclass
class LinkDataset:
    """Column-oriented link records; ``meta`` carries config and seed provenance."""

    columns: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.columns["height_m"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    @property
    def gu_height(self) -> float:
        return float(self.meta.get("gu_height_m", 1.5))

    def subset(self, mask: np.ndarray) -> "LinkDataset":
        return LinkDataset({k: v[mask] for k, v in self.columns.items()}, dict(self.meta))

    def with_columns(self, **cols: np.ndarray) -> "LinkDataset":
        out = dict(self.columns)
        out.update(cols)
        return LinkDataset(out, dict(self.meta))

    def links(self) -> Iterator[LinkSample]:
        c = self.columns
        heights = sorted(set(c["height_m"].tolist()))
        h_index = {h: i for i, h in enumerate(heights)}
        gz = self.gu_height
        for k in range(len(self)):
            h = float(c["height_m"][k])
            link = Link(Position3D(float(c["abs_x"][k]), float(c["abs_y"][k]), h),
                        Position3D(float(c["gu_x"][k]), float(c["gu_y"][k]), gz),
                        float(c["r_m"][k]), float(c["d_m"][k]), float(c["theta_rad"][k]))
            pl = float(c["pathloss_db"][k]) if "pathloss_db" in c else None
            yield LinkSample(link, bool(c["los"][k]), pl, int(c["city_id"][k]), h_index[h])

    @classmethod
    def concat(cls, parts: Sequence["LinkDataset"], meta: dict | None = None) -> "LinkDataset":
        if not parts:
            raise EmptyDataset("nothing to concatenate")
        cols = {k: np.concatenate([p.columns[k] for p in parts]) for k in parts[0].columns}
        return cls(cols, dict(meta if meta is not None else parts[0].meta))


def _fmt_column(name: str, values: np.ndarray) -> list[str]:
    if name in INT_COLUMNS:
        return [str(v) for v in values.astype(np.int64).tolist()]
    return [repr(v) for v in values.astype(float).tolist()]


def write_table_csv(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> None:
    names = list(columns)
    text = [_fmt_column(n, np.asarray(columns[n])) for n in names]
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write(",".join(names) + "\n")
    for row in zip(*text):
        buf.write(",".join(row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_table_csv(path) -> tuple[dict[str, np.ndarray], dict]:
    meta: dict = {}
    with open(path) as fh:
        line = fh.readline()
        skip = 1
        if line.startswith("#"):
            meta = json.loads(line[1:].strip() or "{}")
            line = fh.readline()
            skip = 2
    names = line.strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(names)))
    cols = {}
    for j, n in enumerate(names):
        col = data[:, j]
        cols[n] = col.astype(np.int64) if n in INT_COLUMNS else col
    return cols, meta


def write_dataset(ds: LinkDataset, path) -> None:
    write_table_csv(path, ds.columns, ds.meta)


def read_dataset(path) -> LinkDataset:
    cols, meta = read_table_csv(path)
    missing = [c for c in BASE_COLUMNS if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    cols["los"] = cols["los"].astype(bool)
    if "los_model" in cols:
        cols["los_model"] = cols["los_model"].astype(bool)
    return LinkDataset(cols, meta)


# -- campaign ---------------------------------------------------------------

def log_heights(count: int = 30, lo: float = 5.0, hi: float = 1000.0) -> list[float]:
    return np.geomspace(lo, hi, count).tolist()


@dataclass
class CampaignConfig:
    env: Env = Env.URBAN
    layouts: list[LayoutKind] = field(default_factory=lambda: [LayoutKind.MANHATTAN])
    area_m: float = 1000.0
    pitch_m: float = 20.0
    gu_height_m: float = 1.5
    heights_m: list[float] = field(default_factory=log_heights)
    cities: int = 20
    seed: int = 0
    highways: list[Highway] | None = None

    def __post_init__(self):
        self.env = Env.parse(self.env)
        if isinstance(self.layouts, (str, LayoutKind)):
            self.layouts = [self.layouts]
        kinds = [LayoutKind.parse(k) for k in self.layouts]
        if LayoutKind.COMBINED in kinds:
            kinds = [LayoutKind.MANHATTAN, LayoutKind.SRU, LayoutKind.FUU, LayoutKind.HEU]
        self.layouts = kinds
        if not kinds:
            raise ValueError("at least one layout kind is required")
        if self.pitch_m <= 0:
            raise ValueError("GU grid pitch must be positive")
        if self.cities < 1:
            raise ValueError("cities must be >= 1")
        if not self.heights_m:
            raise ValueError("at least one ABS height is required")
        for h in self.heights_m:
            if not self.gu_height_m < h <= 1e4:
                raise ValueError(f"ABS height {h} outside ({self.gu_height_m}, 1e4] m")

    def layout_for(self, city: int) -> LayoutKind:
        """Layout kinds are assigned to cities round-robin."""
        return self.layouts[city % len(self.layouts)]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["env"] = self.env.value
        d["layouts"] = [k.value for k in self.layouts]
        if self.highways is not None:
            d["highways"] = [asdict(h) for h in self.highways]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CampaignConfig":
        d = dict(d)
        if "layout" in d and "layouts" not in d:
            d["layouts"] = d.pop("layout")
        h = d.get("heights_m", d.pop("heights", None))
        if isinstance(h, dict):
            count, lo, hi = int(h.get("count", 30)), float(h.get("min", 5.0)), float(h.get("max", 1000.0))
            spacing = h.get("spacing", "log")
            if spacing == "log":
                h = log_heights(count, lo, hi)
            elif spacing == "linear":
                h = np.linspace(lo, hi, count).tolist()
            else:
                raise ValueError(f"unknown height spacing {spacing!r}")
        if h is not None:
            d["heights_m"] = [float(v) for v in h]
        if d.get("highways") is not None:
            d["highways"] = [Highway(**hw) for hw in d["highways"]]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown campaign config keys {sorted(unknown)}")
        return cls(**d)


def gu_grid(area: float, pitch: float) -> np.ndarray:
    ticks = np.arange(0.0, area + 1e-9 * max(area, 1.0), pitch)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _place_abs(boxes: np.ndarray, area: float, height: float, rng: np.random.Generator) -> np.ndarray:
    while True:
        p = np.array([rng.random() * area, rng.random() * area, height])
        if len(boxes) == 0 or not _inside_volume(p, boxes):
            return p


def realization(config: CampaignConfig, height_index: int, city: int,
                layout: CityLayout | None = None) -> LinkDataset:
    """One (height, city) work unit: fresh layout, random ABS, grid of GUs."""
    h = float(config.heights_m[height_index])
    if layout is None:
        layout = generate(config.layout_for(city), config.env, config.area_m,
                          substream(config.seed, "urbgen", height_index, city), config.highways)
    boxes = layout.footprints
    abs_p = _place_abs(boxes, config.area_m, h, substream(config.seed, "campaign", height_index, city))
    grid = gu_grid(config.area_m, config.pitch_m)
    grid = grid[~inside_footprints(grid, boxes)]
    gu = np.column_stack([grid, np.full(len(grid), config.gu_height_m)])
    r, d, theta = geometry_arrays(abs_p, gu)
    los = los_mask(boxes, abs_p, gu)
    n = len(gu)
    cols = {
        "height_m": np.full(n, h), "city_id": np.full(n, city, dtype=np.int64),
        "abs_x": np.full(n, abs_p[0]), "abs_y": np.full(n, abs_p[1]),
        "gu_x": gu[:, 0], "gu_y": gu[:, 1], "r_m": r, "d_m": d, "theta_rad": theta, "los": los,
    }
    return LinkDataset(cols)


def run_campaign(config: CampaignConfig, threads: int = 1, progress=None) -> LinkDataset:
    units = [(hi, c) for hi in range(len(config.heights_m)) for c in range(config.cities)]
    if threads <= 1:
        parts = []
        for u in units:
            parts.append(realization(config, *u))
            if progress:
                progress(u)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda u: realization(config, *u), units))
    meta = {"kind": "links", "config": config.to_dict(), "seed": config.seed,
            "gu_height_m": config.gu_height_m}
    return LinkDataset.concat(parts, meta)


# -- empirical P_LoS --------------------------------------------------------

@dataclass
class PlosCurve:
    theta: np.ndarray
    p: np.ndarray
    n_los: np.ndarray
    n_total: np.ndarray
    valid: np.ndarray
    bin_width: float = DEFAULT_BIN_WIDTH

    def fit_view(self) -> "PlosCurve":
        m = self.valid
        return PlosCurve(self.theta[m], self.p[m], self.n_los[m], self.n_total[m],
                         np.ones(int(m.sum()), dtype=bool), self.bin_width)

    def to_columns(self) -> dict[str, np.ndarray]:
        return {"theta_rad": self.theta, "p_los": self.p, "n_los": self.n_los, "n_total": self.n_total}


def empirical_plos(dataset_or_theta, los=None, bin_width: float = DEFAULT_BIN_WIDTH,
                   min_count: int = DEFAULT_MIN_BIN_COUNT) -> PlosCurve:
    """Binned LoS ratio over elevation; bins below ``min_count`` are flagged invalid."""
    if los is None:
        theta = np.asarray(dataset_or_theta["theta_rad"], dtype=float)
        los = np.asarray(dataset_or_theta["los"], dtype=bool)
    else:
        theta = np.asarray(dataset_or_theta, dtype=float)
        los = np.asarray(los, dtype=bool)
    if theta.size == 0:
        raise EmptyDataset("no links to bin")
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    nbins = int(math.ceil(math.pi / 2 / bin_width - 1e-9))
    k = np.clip(np.floor(theta / bin_width).astype(np.int64), 0, nbins - 1)
    total = np.bincount(k, minlength=nbins)
    nlos = np.bincount(k, weights=los.astype(float), minlength=nbins).astype(np.int64)
    used = total > 0
    centers = (np.arange(nbins) + 0.5) * bin_width
    tot = total[used]
    return PlosCurve(centers[used], nlos[used] / tot, nlos[used], tot,
                     tot >= min_count, bin_width)


def write_plos_curve(curve: PlosCurve, path, meta: dict | None = None) -> None:
    write_table_csv(path, curve.to_columns(), meta)


def read_plos_curve(path, min_count: int = DEFAULT_MIN_BIN_COUNT) -> PlosCurve:
    cols, meta = read_table_csv(path)
    n_total = cols["n_total"].astype(np.int64)
    theta = cols["theta_rad"]
    width = float(meta.get("bin_width", np.min(np.diff(theta)) if len(theta) > 1 else DEFAULT_BIN_WIDTH))
    return PlosCurve(theta, cols["p_los"], cols["n_los"].astype(np.int64), n_total,
                     n_total >= min_count, width)


def random_links(heights: Sequence[float], n_per_height: int, rng: np.random.Generator,
                 area: float = 1000.0, gu_height: float = 1.5) -> LinkDataset:
    """Obstacle-free geometry: ABS and GU uniform over the square at each height.

    Used to drive the channel sampler where no layout is involved; the
    ``los`` column is left all-true.
    """
    parts = []
    for h in heights:
        n = int(n_per_height)
        a = rng.random((n, 2)) * area
        g = rng.random((n, 2)) * area
        r, d, theta = geometry_arrays(np.column_stack([a, np.full(n, float(h))]),
                                      np.column_stack([g, np.full(n, gu_height)]))
        parts.append(LinkDataset({
            "height_m": np.full(n, float(h)), "city_id": np.zeros(n, dtype=np.int64),
            "abs_x": a[:, 0], "abs_y": a[:, 1], "gu_x": g[:, 0], "gu_y": g[:, 1],
            "r_m": r, "d_m": d, "theta_rad": theta, "los": np.ones(n, dtype=bool),
        }))
    return LinkDataset.concat(parts, {"kind": "links", "gu_height_m": gu_height, "synthetic_geometry": True})
