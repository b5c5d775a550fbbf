import json
import math

import numpy as np
import pytest

from a2g.errors import InsufficientBins, UnknownCombination
from a2g.geomlos import PlosCurve
from a2g.plosmod import SigmoidParams, builtin_sigmoid, fit_sigmoid, sigmoid_plos
from a2g.tables import Env, LayoutKind

THETA = np.radians(np.arange(1.0, 90.0, 2.0))


def curve(p, n=1000, theta=THETA):
    n_total = np.full(len(theta), n)
    return PlosCurve(theta, p, np.round(p * n).astype(int), n_total, np.ones(len(theta), bool),
                     math.radians(2))


def test_sigmoid_examples():
    sub = builtin_sigmoid("combined", "suburban")
    assert sigmoid_plos(math.pi / 4, sub) == pytest.approx(0.8995, abs=1e-3)
    assert 1 / (1 + math.exp(-2.19)) == pytest.approx(sigmoid_plos(math.pi / 4, sub), abs=1e-3)
    assert sigmoid_plos(math.pi / 2, sub) > 0.99999
    zero = SigmoidParams(0, 0, 0, 0)
    assert np.all(sigmoid_plos(THETA, zero) == 0.5)


def test_sigmoid_stays_finite_for_extreme_exponents():
    p = sigmoid_plos(np.array([0.0, 1.5]), SigmoidParams(0, 0, 0, 800.0))
    assert np.all(np.isfinite(p)) and np.all(p == 0.0)


@pytest.mark.parametrize("layout, env, coeffs", [
    ("manhattan", "suburban", (-5.776, 13.96, -12.28, 1.945)),
    ("fuu", "high-rise", (-6.721, 18.93, -20.69, 8.675)),
    ("combined", "urban", (-4.66, 11.42, -11.45, 3.369)),
])
def test_builtin_rows(layout, env, coeffs):
    assert builtin_sigmoid(layout, env).as_tuple() == coeffs


def test_builtin_unknown():
    with pytest.raises((UnknownCombination, ValueError)):
        builtin_sigmoid("triangular", "urban")


def test_params_json_roundtrip():
    p = builtin_sigmoid("heu", "dense-urban")
    assert SigmoidParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p


def test_noiseless_self_fit_dense_urban():
    truth = builtin_sigmoid("combined", "dense-urban")
    fitted, diag = fit_sigmoid(curve(sigmoid_plos(THETA, truth)))
    assert np.abs(sigmoid_plos(THETA, fitted) - sigmoid_plos(THETA, truth)).max() < 1e-4
    assert diag.within_tolerance and diag.n_bins == len(THETA)


def test_binomial_noise_roundtrip():
    truth = builtin_sigmoid("combined", "dense-urban")
    rng = np.random.default_rng(0)
    k = rng.binomial(1000, sigmoid_plos(THETA, truth))
    c = PlosCurve(THETA, k / 1000, k, np.full(len(THETA), 1000), np.ones(len(THETA), bool), math.radians(2))
    fitted, _ = fit_sigmoid(c)
    grid = np.linspace(THETA[0], THETA[-1], 400)
    assert np.abs(sigmoid_plos(grid, fitted) - sigmoid_plos(grid, truth)).max() <= 0.03


def test_invalid_bins_ignored():
    truth = builtin_sigmoid("sru", "urban")
    p = sigmoid_plos(THETA, truth)
    c = curve(p)
    c.p = c.p.copy()
    c.p[::5] = 0.0
    c.valid = np.ones(len(THETA), bool)
    c.valid[::5] = False
    fitted, diag = fit_sigmoid(c)
    assert np.abs(sigmoid_plos(THETA, fitted) - p).max() < 1e-4
    assert diag.n_bins == int(c.valid.sum())


def test_insufficient_bins():
    with pytest.raises(InsufficientBins):
        fit_sigmoid(curve(np.full(7, 0.5), theta=THETA[:7] * 3))
    narrow = np.radians(np.arange(10.0, 40.0, 2.0))
    with pytest.raises(InsufficientBins):
        fit_sigmoid(curve(np.full(len(narrow), 0.5), theta=narrow))


def test_diagnostics_dict():
    _, diag = fit_sigmoid(curve(sigmoid_plos(THETA, builtin_sigmoid("fuu", "urban"))))
    d = diag.to_dict()
    assert set(d) >= {"rmse", "iters"} and d["iters"] > 0


@pytest.mark.parametrize("k", list(LayoutKind))
def test_suburban_above_high_rise(k):
    grid = np.radians(np.arange(10.0, 81.0, 1.0))
    ps = sigmoid_plos(grid, builtin_sigmoid(k, Env.SUBURBAN))
    ph = sigmoid_plos(grid, builtin_sigmoid(k, Env.HIGH_RISE))
    if k is LayoutKind.COMBINED:
        assert np.all(ps >= ph)
    else:
        assert np.mean(ps >= ph) > 0.9
