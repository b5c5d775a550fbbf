"""Re-derive fading parameters from link datasets.

Per ABS height and LoS state the path-loss exponent is regressed with the
intercept pinned to the free-space reference loss, shadowing is the residual
spread, and both are then fitted over height with saturating exponentials.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .errors import InsufficientSpread, MissingPathloss, NonConvergence, TooFewSamples
from .lsfmod import (DEFAULT_FC_HZ, HeightSegment, LosParams, LsfParams, NlosParams, PLEModel,
                     ShadowModel, fspl_reference)
from .tables import MAX_HEIGHT_M

MIN_LINKS = 30
MIN_LOG_SPREAD = 0.3
MIN_DISTANCE_M = 10.0
MIN_HEIGHTS = 8
MIN_FIT_POINTS = 5
H0_BOUNDS = (1.0, 5000.0)


@dataclass
class HeightSlice:
    height: float
    los_d: np.ndarray
    los_pl: np.ndarray
    nlos_d: np.ndarray
    nlos_pl: np.ndarray

    def state(self, los: bool) -> tuple[np.ndarray, np.ndarray]:
        return (self.los_d, self.los_pl) if los else (self.nlos_d, self.nlos_pl)


def _regression_inputs(d, pathloss_db, d0: float, min_distance: float):
    d = np.asarray(d, dtype=float)
    pl = np.asarray(pathloss_db, dtype=float)
    keep = d >= min_distance
    return d[keep], pl[keep]


def estimate_ple(d, pathloss_db, ref_loss_db: float, d0: float = 1.0,
                 min_distance: float = MIN_DISTANCE_M, min_links: int = MIN_LINKS) -> float:
    """Least-squares PLE through the fixed point ``(d0, ref_loss_db)``."""
    d, pl = _regression_inputs(d, pathloss_db, d0, min_distance)
    if len(d) == 0 or np.log10(d.max() / d.min()) < MIN_LOG_SPREAD:
        raise InsufficientSpread("distances span less than 0.3 decades")
    if len(d) < min_links:
        raise TooFewSamples(f"{len(d)} links, need {min_links}")
    g = np.log10(d / d0)
    return float(np.dot(pl - ref_loss_db, g) / (10.0 * np.dot(g, g)))


def shadow_residuals(d, pathloss_db, ple: float, ref_loss_db: float, d0: float = 1.0,
                     min_distance: float = MIN_DISTANCE_M) -> tuple[np.ndarray, float]:
    """Residuals about the fitted law and their sample standard deviation."""
    d, pl = _regression_inputs(d, pathloss_db, d0, min_distance)
    psi = pl - (ref_loss_db + 10.0 * ple * np.log10(d / d0))
    sigma = float(np.std(psi, ddof=1)) if len(psi) > 1 else 0.0
    return psi, sigma


@dataclass
class ExpFit:
    v0: float
    v_inf: float
    h0: float
    rmse: float
    identifiable: bool = True
    iters: int = 0

    def __call__(self, h):
        return self.v_inf + (self.v0 - self.v_inf) * np.exp(-np.asarray(h, dtype=float) / self.h0)

    def to_dict(self) -> dict[str, Any]:
        return {"v0": self.v0, "v_inf": self.v_inf, "h0": self.h0, "rmse": self.rmse,
                "identifiable": self.identifiable, "iters": self.iters}


def fit_exponential(points: Sequence[tuple[float, float]], asymptote_guess: float | None = None,
                    weights=None) -> ExpFit:
    """Fit ``v(h) = v_inf + (v0 - v_inf) exp(-h / h0)`` with ``h0`` in [1, 5000] m.

    Simplex search from endpoint heuristics, then a refinement over ``h0``
    with the two linear coefficients solved exactly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < MIN_FIT_POINTS:
        raise TooFewSamples(f"need at least {MIN_FIT_POINTS} height points")
    order = np.argsort(pts[:, 0])
    h, v = pts[order, 0], pts[order, 1]
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float)[order]
    sw = np.sqrt(w / w.mean())
    lo, hi = H0_BOUNDS

    def sse(x):
        h0 = min(max(x[2], lo), hi)
        r = (x[1] + (x[0] - x[1]) * np.exp(-h / h0) - v) * sw
        return float(np.dot(r, r))

    x0 = np.array([v[0], v[-1] if asymptote_guess is None else asymptote_guess, 100.0])
    res = minimize(sse, x0, method="Nelder-Mead", bounds=[(None, None), (None, None), H0_BOUNDS],
                   options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 20000, "maxfev": 40000})
    if not np.all(np.isfinite(res.x)):
        raise NonConvergence("exponential fit diverged")
    best = (float(res.x[0]), float(res.x[1]), float(min(max(res.x[2], lo), hi)), float(res.fun))

    def profile(log_h0):
        e = np.exp(-h / math.exp(log_h0))
        a = np.column_stack([e, 1.0 - e]) * sw[:, None]
        coef, *_ = np.linalg.lstsq(a, v * sw, rcond=None)
        r = a @ coef - v * sw
        return float(np.dot(r, r)), coef

    ref = minimize_scalar(lambda t: profile(t)[0], bounds=(math.log(lo), math.log(hi)),
                          method="bounded", options={"xatol": 1e-12})
    f_ref, coef = profile(ref.x)
    if f_ref < best[3]:
        best = (float(coef[0]), float(coef[1]), math.exp(ref.x), f_ref)
    v0, v_inf, h0, _ = best
    fit = ExpFit(v0, v_inf, h0, 0.0, True, int(res.nit))
    scale = max(1.0, float(np.abs(v).max()))
    # the decay term is invisible at the sampled heights: h0 and v0 are not pinned down
    if np.abs((v0 - v_inf) * np.exp(-h / h0)).max() < 1e-6 * scale or abs(v0 - v_inf) < 1e-9 * scale:
        mean = float(np.average(v, weights=w))
        fit = ExpFit(mean, mean, h0, 0.0, False, int(res.nit))
    fit.rmse = float(np.sqrt(np.mean((fit(h) - v) ** 2)))
    return fit


# -- dataset pipeline -------------------------------------------------------

@dataclass
class StateCurve:
    heights: np.ndarray
    n_hat: np.ndarray
    sigma_hat: np.ndarray
    counts: np.ndarray
    used: np.ndarray


@dataclass
class ExtractionResult:
    los: StateCurve
    nlos: StateCurve
    lsf: LsfParams
    fits: dict[str, Any]
    diagnostics: dict[str, Any] = field(default_factory=dict)
    env: str | None = None
    breakpoint: float | None = None

    def to_dict(self) -> dict[str, Any]:
        d = self.lsf.to_dict()
        d["env"] = self.env
        d["breakpoint_m"] = self.breakpoint
        d["diagnostics"] = self.diagnostics
        return d

    def curve_rows(self) -> list[tuple[float, str, float, float, int]]:
        rows = []
        for name, c in (("los", self.los), ("nlos", self.nlos)):
            for k in range(len(c.heights)):
                rows.append((float(c.heights[k]), name, float(c.n_hat[k]), float(c.sigma_hat[k]),
                             int(c.counts[k])))
        rows.sort(key=lambda r: (r[0], r[1]))
        return rows


def write_curves_csv(result: ExtractionResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["height_m", "state", "n_hat", "sigma_hat", "count"])
        for h, s, n, sig, cnt in result.curve_rows():
            w.writerow([repr(h), s, repr(n), repr(sig), cnt])


def read_curves_csv(path) -> list[tuple[float, str, float, float, int]]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        return [(float(r["height_m"]), r["state"], float(r["n_hat"]), float(r["sigma_hat"]),
                 int(r["count"])) for r in rd]


def slices(dataset, state_column: str | None = None) -> list[HeightSlice]:
    if "pathloss_db" not in dataset:
        raise MissingPathloss("dataset has no pathloss_db column")
    col = state_column or ("los_model" if "los_model" in dataset else "los")
    state = np.asarray(dataset[col], dtype=bool)
    h_all = np.asarray(dataset["height_m"], dtype=float)
    d_all = np.asarray(dataset["d_m"], dtype=float)
    pl_all = np.asarray(dataset["pathloss_db"], dtype=float)
    out = []
    for h in np.unique(h_all):
        m = h_all == h
        out.append(HeightSlice(float(h), d_all[m & state], pl_all[m & state],
                               d_all[m & ~state], pl_all[m & ~state]))
    return out


def _state_curve(sl: list[HeightSlice], los: bool, ref: float, d0: float, flags: list) -> StateCurve:
    hs, ns, ss, cs, used = [], [], [], [], []
    for s in sl:
        d, pl = s.state(los)
        cnt = int((d >= MIN_DISTANCE_M).sum())
        try:
            n = estimate_ple(d, pl, ref, d0)
            _, sig = shadow_residuals(d, pl, n, ref, d0)
            ok = True
        except (InsufficientSpread, TooFewSamples) as exc:
            n, sig, ok = math.nan, math.nan, False
            flags.append({"height_m": s.height, "state": "los" if los else "nlos", "reason": str(exc)})
        hs.append(s.height), ns.append(n), ss.append(sig), cs.append(cnt), used.append(ok)
    return StateCurve(np.array(hs), np.array(ns), np.array(ss), np.array(cs, dtype=np.int64),
                      np.array(used, dtype=bool))


def _points(c: StateCurve, values: np.ndarray, mask=None) -> np.ndarray:
    m = c.used if mask is None else c.used & mask
    return np.column_stack([c.heights[m], values[m]])


def extract_all(dataset, env: str | None = None, breakpoint: float | None = None,
                fc: float = DEFAULT_FC_HZ, d0: float = 1.0, min_heights: int = MIN_HEIGHTS,
                state_column: str | None = None) -> ExtractionResult:
    """Per-height estimates for both states, then height fits.

    With ``breakpoint`` the NLoS PLE is fitted separately on heights at or
    below it and above it.
    """
    ref = fspl_reference(fc, d0)
    sl = slices(dataset, state_column)
    flags: list = []
    los = _state_curve(sl, True, ref, d0, flags)
    nlos = _state_curve(sl, False, ref, d0, flags)
    for name, c in (("los", los), ("nlos", nlos)):
        if c.used.sum() < min_heights:
            raise TooFewSamples(f"{name}: {int(c.used.sum())} usable heights, need {min_heights}")

    fits: dict[str, Any] = {}
    fits["los_sigma"] = fit_exponential(_points(los, los.sigma_hat))
    fits["nlos_sigma"] = fit_exponential(_points(nlos, nlos.sigma_hat))
    w = los.counts[los.used].astype(float)
    los_n = float(np.average(los.n_hat[los.used], weights=w))
    h_top = max(MAX_HEIGHT_M, float(np.max([s.height for s in sl])))
    if breakpoint is None:
        f = fit_exponential(_points(nlos, nlos.n_hat))
        fits["nlos_ple"] = [f]
        segs = (HeightSegment(0.0, h_top, f.v0, f.v_inf, f.h0),)
    else:
        low = fit_exponential(_points(nlos, nlos.n_hat, nlos.heights <= breakpoint))
        high = fit_exponential(_points(nlos, nlos.n_hat, nlos.heights > breakpoint))
        fits["nlos_ple"] = [low, high]
        segs = (HeightSegment(0.0, breakpoint, low.v0, low.v_inf, low.h0),
                HeightSegment(breakpoint, h_top, high.v0, high.v_inf, high.h0))

    def shadow(f: ExpFit) -> ShadowModel:
        floor = 1e-3
        return ShadowModel(max(f.v0, floor), max(f.v_inf, floor), f.h0)

    lsf = LsfParams(LosParams(los_n, shadow(fits["los_sigma"])),
                    NlosParams(PLEModel(segs), shadow(fits["nlos_sigma"])), d0=d0, fc=fc)
    los_rmse = float(np.sqrt(np.mean((los.n_hat[los.used] - los_n) ** 2)))
    diagnostics = {
        "rmse": {
            "los_ple": los_rmse,
            "los_sigma": fits["los_sigma"].rmse,
            "nlos_ple": [f.rmse for f in fits["nlos_ple"]],
            "nlos_sigma": fits["nlos_sigma"].rmse,
        },
        "identifiable": {k: ([f.identifiable for f in v] if isinstance(v, list) else v.identifiable)
                         for k, v in fits.items()},
        "excluded": flags,
        "heights": {"los": int(los.used.sum()), "nlos": int(nlos.used.sum())},
    }
    return ExtractionResult(los, nlos, lsf, fits, diagnostics, env, breakpoint)
