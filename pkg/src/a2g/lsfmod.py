"""Height-dependent log-distance path loss with Gaussian shadowing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import HeightOutOfRange
from .plosmod import SigmoidParams, builtin_sigmoid, sigmoid_plos
from .tables import LOS_PLE, MAX_HEIGHT_M, SUBURBAN_BREAKPOINT_M, LayoutKind, Env, table_row

C_LIGHT = 299_792_458.0
DEFAULT_FC_HZ = 26e9


def fspl_reference(fc: float = DEFAULT_FC_HZ, d0: float = 1.0) -> float:
    """Free-space path loss at ``d0`` meters, in dB."""
    if fc <= 0 or d0 <= 0:
        raise ValueError("fc and d0 must be positive")
    return 20.0 * math.log10(4.0 * math.pi * d0 * fc / C_LIGHT)


def _decay(h, v0: float, v_inf: float, h0: float):
    return v_inf + (v0 - v_inf) * np.exp(-np.asarray(h, dtype=float) / h0)


@dataclass(frozen=True)
class HeightSegment:
    """PLE law ``n_inf + (n0 - n_inf) exp(-h / h0)`` valid on ``(h_min, h_max]``."""

    h_min: float
    h_max: float
    n0: float
    n_inf: float
    h0: float

    def __post_init__(self):
        if not self.h_min < self.h_max:
            raise ValueError("segment needs h_min < h_max")
        if self.h0 <= 0:
            raise ValueError("decay height must be positive")

    def evaluate(self, h):
        return _decay(h, self.n0, self.n_inf, self.h0)


@dataclass(frozen=True)
class PLEModel:
    segments: tuple[HeightSegment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("PLE model needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if a.h_max != b.h_min:
                raise ValueError(f"segments not contiguous at {a.h_max} / {b.h_min}")

    @property
    def h_range(self) -> tuple[float, float]:
        return self.segments[0].h_min, self.segments[-1].h_max

    def __call__(self, h):
        return ple_at(h, self)


def ple_at(h, model: PLEModel):
    """PLE at ABS height(s) ``h``; each height uses the segment whose ``(h_min, h_max]`` holds it."""
    ha = np.asarray(h, dtype=float)
    lo, hi = model.h_range
    if np.any(ha <= lo) or np.any(ha > hi):
        raise HeightOutOfRange(f"height outside the modeled range ({lo}, {hi}] m")
    out = np.empty_like(ha)
    for seg in model.segments:
        m = (ha > seg.h_min) & (ha <= seg.h_max)
        out[m] = seg.evaluate(ha[m])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ShadowModel:
    sigma0: float
    sigma_inf: float
    h0: float

    def __post_init__(self):
        if self.sigma0 <= 0 or self.sigma_inf <= 0 or self.h0 <= 0:
            raise ValueError("shadow model parameters must be positive")

    def __call__(self, h):
        return shadow_sigma_at(h, self)


def shadow_sigma_at(h, model: ShadowModel):
    s = _decay(h, model.sigma0, model.sigma_inf, model.h0)
    return float(s) if np.ndim(s) == 0 else s


@dataclass(frozen=True)
class LosParams:
    n: float
    shadow: ShadowModel


@dataclass(frozen=True)
class NlosParams:
    ple: PLEModel
    shadow: ShadowModel


@dataclass(frozen=True)
class LsfParams:
    los: LosParams
    nlos: NlosParams
    d0: float = 1.0
    fc: float = DEFAULT_FC_HZ
    obstacle_offset_db: float = 0.0

    def __post_init__(self):
        if self.d0 <= 0 or self.fc <= 0:
            raise ValueError("d0 and fc must be positive")
        if self.obstacle_offset_db < 0:
            raise ValueError("obstacle offset must be >= 0 dB")

    @property
    def ref_loss_db(self) -> float:
        return fspl_reference(self.fc, self.d0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "d0": self.d0, "fc": self.fc, "obstacle_offset_db": self.obstacle_offset_db,
            "los": {"n": self.los.n, "shadow": _shadow_dict(self.los.shadow)},
            "nlos": {
                "ple": [{"h_min": s.h_min, "h_max": s.h_max, "n0": s.n0, "n_inf": s.n_inf, "h0": s.h0}
                        for s in self.nlos.ple.segments],
                "shadow": _shadow_dict(self.nlos.shadow),
            },
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LsfParams":
        segs = tuple(HeightSegment(float(s["h_min"]), float(s["h_max"]), float(s["n0"]),
                                   float(s["n_inf"]), float(s["h0"])) for s in d["nlos"]["ple"])
        return cls(
            los=LosParams(float(d["los"]["n"]), ShadowModel(**d["los"]["shadow"])),
            nlos=NlosParams(PLEModel(segs), ShadowModel(**d["nlos"]["shadow"])),
            d0=float(d.get("d0", 1.0)), fc=float(d.get("fc", DEFAULT_FC_HZ)),
            obstacle_offset_db=float(d.get("obstacle_offset_db", 0.0)),
        )


def _shadow_dict(s: ShadowModel) -> dict[str, float]:
    return {"sigma0": s.sigma0, "sigma_inf": s.sigma_inf, "h0": s.h0}


def segments_from_rows(rows: Sequence[tuple[float, float, float]],
                       breakpoint: float = SUBURBAN_BREAKPOINT_M,
                       h_max: float = MAX_HEIGHT_M) -> PLEModel:
    """One row covers ``(0, h_max]``; two rows split at ``breakpoint``."""
    if len(rows) == 1:
        return PLEModel((HeightSegment(0.0, h_max, *rows[0]),))
    if len(rows) == 2:
        return PLEModel((HeightSegment(0.0, breakpoint, *rows[0]),
                         HeightSegment(breakpoint, h_max, *rows[1])))
    raise ValueError("expected one or two PLE rows")


def builtin_lsf(layout, env, fc: float = DEFAULT_FC_HZ, obstacle_offset_db: float = 0.0) -> LsfParams:
    row = table_row(layout, env)
    return LsfParams(
        los=LosParams(LOS_PLE, ShadowModel(*row["los_shadow"])),
        nlos=NlosParams(segments_from_rows(row["nlos_ple"]), ShadowModel(*row["nlos_shadow"])),
        fc=fc, obstacle_offset_db=obstacle_offset_db,
    )


@dataclass(frozen=True)
class ChannelModel:
    """LoS probability and fading laws for one (layout, environment) pair."""

    sigmoid: SigmoidParams
    lsf: LsfParams
    layout: str | None = None
    env: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"layout": self.layout, "env": self.env, "sigmoid": self.sigmoid.to_dict(),
                "lsf": self.lsf.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChannelModel":
        return cls(SigmoidParams.from_dict(d["sigmoid"]), LsfParams.from_dict(d["lsf"]),
                   d.get("layout"), d.get("env"))


def builtin_model(layout, env, **kw) -> ChannelModel:
    return ChannelModel(builtin_sigmoid(layout, env), builtin_lsf(layout, env, **kw),
                        LayoutKind.parse(layout).value, Env.parse(env).value)


def mean_los_loss(d, lsf: LsfParams):
    return lsf.ref_loss_db + 10.0 * lsf.los.n * np.log10(np.asarray(d, dtype=float) / lsf.d0)


def mean_nlos_loss(d, h, lsf: LsfParams):
    n = ple_at(h, lsf.nlos.ple)
    return (lsf.ref_loss_db + 10.0 * n * np.log10(np.asarray(d, dtype=float) / lsf.d0)
            + lsf.obstacle_offset_db)


def mean_attenuation(d, h, theta, sigmoid: SigmoidParams | None, lsf: LsfParams, p_los=None):
    """LoS-probability-weighted mean path loss in dB.

    ``p_los`` overrides the sigmoid (used to pin the mixture to pure LoS/NLoS).
    """
    if np.any(np.asarray(d) < lsf.d0):
        raise ValueError("distance below the reference distance")
    p = sigmoid_plos(theta, sigmoid) if p_los is None else np.asarray(p_los, dtype=float)
    out = p * mean_los_loss(d, lsf) + (1.0 - p) * mean_nlos_loss(d, h, lsf)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ChannelSample:
    los: bool
    pathloss_db: float
    shadow_db: float


def sample_channels(d, h, theta, lsf: LsfParams, rng: np.random.Generator,
                    los=None, sigmoid: SigmoidParams | None = None):
    """Vectorized channel draws; returns ``(los, pathloss_db, shadow_db)`` arrays.

    ``los`` fixes the state per link; otherwise it is Bernoulli(P_LoS(theta))
    and ``sigmoid`` is required.  The state draw always consumes one uniform
    per link so shadow draws line up across modes.
    """
    d = np.atleast_1d(np.asarray(d, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), d.shape)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), d.shape)
    u = rng.random(d.shape)
    if los is None:
        if sigmoid is None:
            raise ValueError("sigmoid parameters are needed to draw the LoS state")
        state = u < sigmoid_plos(theta, sigmoid)
    else:
        state = np.broadcast_to(np.asarray(los, dtype=bool), d.shape).copy()
    z = rng.standard_normal(d.shape)
    sigma = np.where(state, shadow_sigma_at(h, lsf.los.shadow), shadow_sigma_at(h, lsf.nlos.shadow))
    shadow = z * sigma
    mean = np.empty_like(d)
    mean[state] = mean_los_loss(d[state], lsf)
    if (~state).any():
        mean[~state] = mean_nlos_loss(d[~state], h[~state], lsf)
    return state, mean + shadow, shadow


def sample_channel(link, los_state, lsf: LsfParams, rng: np.random.Generator,
                   sigmoid: SigmoidParams | None = None) -> ChannelSample:
    """Draw one realization for ``link``; ``los_state=None`` samples it from the sigmoid."""
    st, pl, sh = sample_channels(link.d, link.abs.z, link.theta, lsf, rng,
                                 None if los_state is None else bool(los_state), sigmoid)
    return ChannelSample(bool(st[0]), float(pl[0]), float(sh[0]))


def with_offset(lsf: LsfParams, offset_db: float) -> LsfParams:
    return replace(lsf, obstacle_offset_db=offset_db)


LOS_MODES = ("geometry", "sigmoid", "los", "nlos")


def synthesize(dataset, model: ChannelModel, rng: np.random.Generator, los_mode: str = "geometry",
               bias_db: float = 0.0):
    """Append ``pathloss_db, shadow_db, los_model`` drawn from ``model`` to a link dataset.

    ``los_mode`` picks the state per link: the dataset's geometric flag, a
    Bernoulli draw from the sigmoid, or a forced LoS/NLoS state.  ``bias_db``
    is added to every path loss (fault injection for validation tests).
    """
    if los_mode not in LOS_MODES:
        raise ValueError(f"los_mode must be one of {LOS_MODES}")
    n = len(dataset)
    los = {"geometry": lambda: np.asarray(dataset["los"], dtype=bool), "sigmoid": lambda: None,
           "los": lambda: np.ones(n, dtype=bool), "nlos": lambda: np.zeros(n, dtype=bool)}[los_mode]()
    state, pl, shadow = sample_channels(dataset["d_m"], dataset["height_m"], dataset["theta_rad"],
                                        model.lsf, rng, los, model.sigmoid)
    out = dataset.with_columns(pathloss_db=pl + bias_db, shadow_db=shadow, los_model=state)
    out.meta["model"] = model.to_dict()
    out.meta["los_mode"] = los_mode
    return out
