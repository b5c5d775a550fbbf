"""Agreement metrics between path-loss data and a channel model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import EmptyInput, GridMismatch, MissingPathloss
from .lsfmod import ChannelModel, mean_attenuation, synthesize
from .seeding import substream

DEFAULT_BINS = 100
REPORT_HEIGHTS = (30.0, 150.0, 1000.0)
CDF_POINTS = 200


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("histogram edges must be strictly increasing")
        if int(self.counts.sum()) != self.total:
            raise ValueError("histogram counts do not sum to total")


def shared_histograms(p_samples, q_samples, bins: int = DEFAULT_BINS) -> tuple[Histogram, Histogram]:
    p = np.asarray(p_samples, dtype=float).ravel()
    q = np.asarray(q_samples, dtype=float).ravel()
    if p.size == 0 or q.size == 0:
        raise EmptyInput("both sample sets must be non-empty")
    lo = min(p.min(), q.min())
    hi = max(p.max(), q.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hp, _ = np.histogram(p, edges)
    hq, _ = np.histogram(q, edges)
    return Histogram(edges, hp, int(p.size)), Histogram(edges, hq, int(q.size))


def kl_divergence(p_samples, q_samples, bins: int = DEFAULT_BINS) -> float:
    """D(p || q) in nats over a shared equal-width grid with add-one smoothing."""
    hp, hq = shared_histograms(p_samples, q_samples, bins)
    pk = (hp.counts + 1.0) / (hp.total + bins)
    qk = (hq.counts + 1.0) / (hq.total + bins)
    return max(float(np.sum(pk * np.log(pk / qk))), 0.0)


def _as_curve(c) -> tuple[np.ndarray | None, np.ndarray]:
    if isinstance(c, tuple) and len(c) == 2:
        return np.asarray(c[0], dtype=float), np.asarray(c[1], dtype=float)
    return None, np.asarray(c, dtype=float)


def curve_rmse(model_curve, empirical_curve) -> float:
    """RMSE between two curves given as value arrays or ``(x, y)`` pairs on the same grid."""
    mx, my = _as_curve(model_curve)
    ex, ey = _as_curve(empirical_curve)
    if my.shape != ey.shape:
        raise GridMismatch(f"curve lengths differ: {my.shape} vs {ey.shape}")
    if mx is not None and ex is not None and not np.allclose(mx, ex, rtol=0, atol=1e-9):
        raise GridMismatch("curves are sampled on different abscissae")
    if my.size == 0:
        raise EmptyInput("empty curves")
    return float(np.sqrt(np.mean((my - ey) ** 2)))


def ecdf(samples, grid) -> np.ndarray:
    s = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(s, grid, side="right") / len(s)


def nearest_heights(available: Sequence[float], wanted: Sequence[float]) -> list[float]:
    av = np.asarray(sorted(set(float(h) for h in available)))
    return [float(av[np.argmin(np.abs(av - w))]) for w in wanted]


def compare_report(dataset, model: ChannelModel, seed: int, heights: Sequence[float] = REPORT_HEIGHTS,
                   bins: int = DEFAULT_BINS, los_mode: str = "sigmoid") -> dict[str, Any]:
    """Evaluate ``model`` on the dataset's own links and compare path-loss statistics.

    KL divergences are D(data || model).  ``mean_offset_db`` is the average of
    data minus the model's mean attenuation on the same geometry.
    """
    if "pathloss_db" not in dataset:
        raise MissingPathloss("dataset has no pathloss_db column")
    if len(dataset) == 0:
        raise EmptyInput("empty dataset")
    synth = synthesize(dataset, model, substream(seed, "validate", 0), los_mode)
    data = np.asarray(dataset["pathloss_db"], dtype=float)
    mod = synth["pathloss_db"]
    h = np.asarray(dataset["height_m"], dtype=float)
    mean_model = mean_attenuation(dataset["d_m"], h, dataset["theta_rad"], model.sigmoid, model.lsf)
    offset = data - mean_model

    per_height = []
    for hv in np.unique(h):
        m = h == hv
        per_height.append({"height_m": float(hv), "count": int(m.sum()),
                           "kl": kl_divergence(data[m], mod[m], bins),
                           "mean_offset_db": float(offset[m].mean())})
    cdfs = []
    for want, hv in zip(heights, nearest_heights(h, heights)):
        m = h == hv
        grid = np.linspace(min(data[m].min(), mod[m].min()), max(data[m].max(), mod[m].max()), CDF_POINTS)
        cdfs.append({"requested_height_m": float(want), "height_m": hv, "kl": kl_divergence(data[m], mod[m], bins),
                     "pathloss_db": grid.tolist(), "cdf_data": ecdf(data[m], grid).tolist(),
                     "cdf_model": ecdf(mod[m], grid).tolist()})
    return {
        "env": model.env, "layout": model.layout, "seed": seed, "bins": bins, "los_mode": los_mode,
        "count": len(dataset),
        "kl": kl_divergence(data, mod, bins),
        "mean_offset_db": float(offset.mean()),
        "per_height": per_height,
        "report_heights": cdfs,
    }
