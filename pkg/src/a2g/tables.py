"""Published built-up parameters and fitted channel coefficients.

Raw rows are kept as plain tuples so the dump produced by ``a2g tables`` can be
diffed against the source table by eye.  Typed accessors live in
:mod:`a2g.plosmod` and :mod:`a2g.lsfmod`.
"""

from __future__ import annotations

from enum import Enum


class Env(str, Enum):
    SUBURBAN = "suburban"
    URBAN = "urban"
    DENSE_URBAN = "dense-urban"
    HIGH_RISE = "high-rise"

    @classmethod
    def parse(cls, value: "str | Env") -> "Env":
        if isinstance(value, Env):
            return value
        key = value.strip().lower().replace("_", "-").replace(" ", "-")
        aliases = {"denseurban": "dense-urban", "highrise": "high-rise"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown environment {value!r}") from None


class LayoutKind(str, Enum):
    MANHATTAN = "manhattan"
    SRU = "sru"
    FUU = "fuu"
    HEU = "heu"
    COMBINED = "combined"

    @classmethod
    def parse(cls, value: "str | LayoutKind") -> "LayoutKind":
        if isinstance(value, LayoutKind):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown layout kind {value!r}") from None


GEOMETRIC_LAYOUTS = (LayoutKind.MANHATTAN, LayoutKind.SRU, LayoutKind.FUU, LayoutKind.HEU)

# (alpha, beta [buildings/km^2], gamma [m])
BUILT_UP = {
    Env.SUBURBAN: (0.1, 750, 8.0),
    Env.URBAN: (0.3, 500, 15.0),
    Env.DENSE_URBAN: (0.5, 300, 20.0),
    Env.HIGH_RISE: (0.5, 300, 50.0),
}

# Suburban NLoS PLE switches segment here; rows below list (<100, 100-1000).
SUBURBAN_BREAKPOINT_M = 100.0
MAX_HEIGHT_M = 1000.0
LOS_PLE = 2.0

# Per row:
#   sigmoid     (x1, x2, x3, x4)
#   los_shadow  (sigma0, sigma_inf, h0)
#   nlos_ple    tuple of (n0, n_inf, h0) segments, low heights first
#   nlos_shadow (sigma0, sigma_inf, h0)
_S, _U, _D, _H = Env.SUBURBAN, Env.URBAN, Env.DENSE_URBAN, Env.HIGH_RISE

MODEL_TABLE: dict[LayoutKind, dict[Env, dict[str, tuple]]] = {
    LayoutKind.MANHATTAN: {
        _S: dict(sigmoid=(-5.776, 13.96, -12.28, 1.945), los_shadow=(3.9, 1.2, 46.0),
                 nlos_ple=((4.2, 2.65, 16.0), (2.5, 2.91, 172.0)), nlos_shadow=(14.6, 11.2, 15.0)),
        _U: dict(sigmoid=(-3.579, 9.018, -9.537, 2.799), los_shadow=(5.3, 2.2, 46.0),
                 nlos_ple=((4.62, 2.75, 49.0),), nlos_shadow=(14.9, 12.8, 610.0)),
        _D: dict(sigmoid=(-3.274, 8.074, -8.839, 3.342), los_shadow=(5.7, 2.8, 80.0),
                 nlos_ple=((4.62, 2.80, 91.0),), nlos_shadow=(16.2, 7.6, 7.0)),
        _H: dict(sigmoid=(-4.008, 9.809, -10.23, 4.849), los_shadow=(5.5, 3.3, 327.0),
                 nlos_ple=((4.55, 2.55, 319.0),), nlos_shadow=(11.5, 17.5, 40.0)),
    },
    LayoutKind.SRU: {
        _S: dict(sigmoid=(-9.31, 20.71, -16.64, 2.78), los_shadow=(3.4, 1.2, 58.0),
                 nlos_ple=((4.48, 2.67, 15.0), (2.5, 2.94, 167.0)), nlos_shadow=(18.6, 11.5, 12.0)),
        _U: dict(sigmoid=(-4.933, 12.40, -12.83, 4.049), los_shadow=(4.5, 2.2, 44.0),
                 nlos_ple=((4.90, 2.79, 42.0),), nlos_shadow=(18.5, 13.9, 58.0)),
        _D: dict(sigmoid=(-4.253, 11.13, -12.37, 4.827), los_shadow=(4.3, 2.5, 72.0),
                 nlos_ple=((4.86, 2.85, 74.0),), nlos_shadow=(18.4, 15.3, 171.0)),
        _H: dict(sigmoid=(-13.16, 37.89, -37.91, 13.73), los_shadow=(4.2, 3.1, 325.0),
                 nlos_ple=((4.81, 2.64, 252.0),), nlos_shadow=(16.5, 18.3, 8.0)),
    },
    LayoutKind.FUU: {
        _S: dict(sigmoid=(-16.54, 30.55, -19.85, 2.668), los_shadow=(2.3, 0.6, 144.0),
                 nlos_ple=((4.04, 2.72, 19.0), (2.54, 2.95, 124.0)), nlos_shadow=(24.0, 11.2, 16.0)),
        _U: dict(sigmoid=(-6.686, 16.24, -14.42, 3.726), los_shadow=(2.4, 1.3, 219.0),
                 nlos_ple=((4.64, 2.89, 36.0),), nlos_shadow=(20.7, 13.2, 66.0)),
        _D: dict(sigmoid=(-2.772, 8.748, -11.10, 4.276), los_shadow=(2.8, 1.7, 133.0),
                 nlos_ple=((4.76, 2.94, 66.0),), nlos_shadow=(19.4, 12.8, 328.0)),
        _H: dict(sigmoid=(-6.721, 18.93, -20.69, 8.675), los_shadow=(3.2, 2.3, 260.0),
                 nlos_ple=((4.72, 2.74, 238.0),), nlos_shadow=(21.7, 16.7, 182.0)),
    },
    LayoutKind.HEU: {
        _S: dict(sigmoid=(-11.49, 23.93, -17.67, 2.468), los_shadow=(2.3, 0.9, 132.0),
                 nlos_ple=((4.19, 2.78, 12.0), (2.41, 2.94, 76.0)), nlos_shadow=(22.7, 12.1, 11.0)),
        _U: dict(sigmoid=(-7.536, 17.33, -15.02, 3.709), los_shadow=(2.7, 1.7, 104.0),
                 nlos_ple=((4.65, 2.91, 37.0),), nlos_shadow=(21.0, 14.2, 66.0)),
        _D: dict(sigmoid=(-5.589, 14.63, -14.35, 4.083), los_shadow=(3.2, 2.0, 76.0),
                 nlos_ple=((4.62, 2.95, 57.0),), nlos_shadow=(20.6, 14.6, 182.0)),
        _H: dict(sigmoid=(-7.308, 21.05, -21.34, 7.568), los_shadow=(3.2, 2.5, 306.0),
                 nlos_ple=((4.58, 2.80, 195.0),), nlos_shadow=(22.3, 16.1, 356.0)),
    },
    LayoutKind.COMBINED: {
        _S: dict(sigmoid=(-12.5, 24.25, -16.99, 2.25), los_shadow=(3.1, 1.1, 69.0),
                 nlos_ple=((4.28, 2.70, 14.0), (2.53, 2.93, 138.0)), nlos_shadow=(19.0, 11.6, 12.0)),
        _U: dict(sigmoid=(-4.66, 11.42, -11.45, 3.369), los_shadow=(4.0, 1.9, 49.0),
                 nlos_ple=((4.71, 2.82, 42.0),), nlos_shadow=(18.3, 14.0, 76.0)),
        _D: dict(sigmoid=(-3.922, 9.727, -10.19, 3.826), los_shadow=(4.3, 2.3, 59.0),
                 nlos_ple=((4.70, 2.87, 73.0),), nlos_shadow=(18.4, 14.3, 375.0)),
        _H: dict(sigmoid=(-3.929, 9.645, -10.26, 5.137), los_shadow=(4.1, 2.8, 220.0),
                 nlos_ple=((4.64, 2.68, 253.0),), nlos_shadow=(16.6, 18.5, 7.0)),
    },
}


def table_row(layout: "str | LayoutKind", env: "str | Env") -> dict[str, tuple]:
    from .errors import UnknownCombination

    try:
        kind = LayoutKind.parse(layout)
        e = Env.parse(env)
    except ValueError as exc:
        raise UnknownCombination(str(exc)) from None
    try:
        return MODEL_TABLE[kind][e]
    except KeyError:
        raise UnknownCombination(f"no published row for ({kind.value}, {e.value})") from None
