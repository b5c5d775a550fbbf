"""Four-coefficient logistic LoS probability over elevation angle (radians)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .errors import InsufficientBins, NonConvergence
from .geomlos import PlosCurve
from .tables import table_row

FIT_INIT = (-5.0, 12.0, -12.0, 4.0)
FIT_RESTARTS = 5
FIT_TOLERANCE = 0.05
MIN_FIT_BINS = 8
MIN_FIT_SPAN = math.radians(40.0)


@dataclass(frozen=True)
class SigmoidParams:
    x1: float
    x2: float
    x3: float
    x4: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4)

    def to_dict(self) -> dict[str, float]:
        return {"x1": self.x1, "x2": self.x2, "x3": self.x3, "x4": self.x4}

    @classmethod
    def from_dict(cls, d) -> "SigmoidParams":
        return cls(float(d["x1"]), float(d["x2"]), float(d["x3"]), float(d["x4"]))


def _exponent(theta, x) -> np.ndarray:
    t = np.asarray(theta, dtype=float)
    return ((x[0] * t + x[1]) * t + x[2]) * t + x[3]


def sigmoid_plos(theta, params: SigmoidParams):
    """P_LoS = 1 / (1 + exp(x1 t^3 + x2 t^2 + x3 t + x4))."""
    p = expit(-_exponent(theta, params.as_tuple()))
    return float(p) if np.ndim(p) == 0 else p


def builtin_sigmoid(layout, env) -> SigmoidParams:
    return SigmoidParams(*table_row(layout, env)["sigmoid"])


@dataclass
class FitDiagnostics:
    rmse: float
    max_abs_err: float
    iters: int
    restarts: int
    tolerance: float
    n_bins: int

    @property
    def within_tolerance(self) -> bool:
        return self.rmse <= self.tolerance

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "max_abs_err": self.max_abs_err, "iters": self.iters,
                "restarts": self.restarts, "tolerance": self.tolerance, "n_bins": self.n_bins}


def fit_sigmoid(curve: PlosCurve, init=FIT_INIT, restarts: int = FIT_RESTARTS,
                tolerance: float = FIT_TOLERANCE, seed: int = 0) -> tuple[SigmoidParams, FitDiagnostics]:
    """Count-weighted least squares via restarted Nelder-Mead.

    Only bins flagged valid take part.  Restarts begin from the best point so
    far, jittered by 20 %; the first run uses ``init`` unchanged.
    """
    c = curve.fit_view()
    if len(c.theta) < MIN_FIT_BINS:
        raise InsufficientBins(f"{len(c.theta)} valid bins, need {MIN_FIT_BINS}")
    if c.theta.max() - c.theta.min() < MIN_FIT_SPAN - 1e-12:
        raise InsufficientBins(
            f"valid bins span {math.degrees(c.theta.max() - c.theta.min()):.1f} deg, need 40")
    theta, p = c.theta, c.p
    w = c.n_total / c.n_total.sum()

    def loss(x):
        r = expit(-_exponent(theta, x)) - p
        return float(np.dot(w, r * r))

    rng = np.random.default_rng(seed)
    best_x = np.asarray(init, dtype=float)
    best_f = loss(best_x)
    iters = 0
    ok = False
    opts = {"xatol": 1e-10, "fatol": 1e-16, "maxiter": 40000, "maxfev": 80000, "adaptive": True}
    for k in range(restarts + 1):
        x0 = best_x if k == 0 else best_x * (1 + 0.2 * rng.standard_normal(4))
        res = minimize(loss, x0, method="Nelder-Mead", options=opts)
        iters += int(res.nit)
        ok = ok or bool(res.success)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    if not ok or not np.all(np.isfinite(best_x)):
        raise NonConvergence("simplex search hit its iteration budget on every restart")
    resid = expit(-_exponent(theta, best_x)) - p
    diag = FitDiagnostics(float(np.sqrt(np.mean(resid ** 2))), float(np.abs(resid).max()),
                          iters, restarts, tolerance, len(theta))
    return SigmoidParams(*map(float, best_x)), diag
