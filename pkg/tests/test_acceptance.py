"""Acceptance suite: one PASS/FAIL line per criterion at pinned tolerances."""

import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from a2g import cli
from a2g.extract import extract_all
from a2g.geomlos import (CampaignConfig, FootprintIndex, Position3D, empirical_plos, is_los, los_mask,
                         random_links, run_campaign)
from a2g.lsfmod import builtin_lsf, builtin_model, ple_at, shadow_sigma_at, synthesize
from a2g.plosmod import builtin_sigmoid, fit_sigmoid, sigmoid_plos
from a2g.seeding import substream
from a2g.tables import GEOMETRIC_LAYOUTS, Env, LayoutKind
from a2g.urbgen import Highway, default_highways, dirichlet_areas, generate_layout, sample_height
from a2g.validate import kl_divergence
from helpers import (brute_blocked, highway_overlap, max_pairwise_overlap, random_links_outside,
                     state_split_dataset)

HEIGHT_GRID = np.geomspace(5.0, 1000.0, 200)


@pytest.fixture
def report(capsys):
    def emit(num, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


# -- 1 ----------------------------------------------------------------------

# (layout, env) -> sigmoid, LoS shadow, NLoS PLE segments, NLoS shadow
PUBLISHED = {
    ("manhattan", "suburban"): ((-5.776, 13.96, -12.28, 1.945), (3.9, 1.2, 46.0),
                                ((4.2, 2.65, 16.0), (2.5, 2.91, 172.0)), (14.6, 11.2, 15.0)),
    ("fuu", "high-rise"): ((-6.721, 18.93, -20.69, 8.675), None, None, None),
    ("combined", "urban"): ((-4.66, 11.42, -11.45, 3.369), (4.0, 1.9, 49.0), ((4.71, 2.82, 42.0),),
                            (18.3, 14.0, 76.0)),
    ("sru", "high-rise"): (None, (4.2, 3.1, 325.0), None, None),
    ("combined", "dense-urban"): (None, None, ((4.70, 2.87, 73.0),), (18.4, 14.3, 375.0)),
    ("combined", "suburban"): ((-12.5, 24.25, -16.99, 2.25), None, (None, (2.53, 2.93, 138.0)), None),
    ("combined", "high-rise"): (None, None, None, (16.6, 18.5, 7.0)),
}


def test_01_table_fidelity(report, tmp_path):
    out = tmp_path / "tables.json"
    assert cli.main(["tables", "-o", str(out)]) == 0
    entries = {(e["layout"], e["env"]): e for e in json.loads(out.read_text())}
    assert len(entries) == 20
    checked, bad = 0, []
    for key, (sig, los, ple, nlos) in PUBLISHED.items():
        e = entries[key]
        if sig is not None:
            checked += 1
            if tuple(e["sigmoid"][k] for k in ("x1", "x2", "x3", "x4")) != sig:
                bad.append((key, "sigmoid"))
        if los is not None:
            checked += 1
            if (e["los"]["sigma0"], e["los"]["sigma_inf"], e["los"]["h0"]) != los:
                bad.append((key, "los"))
        if ple is not None:
            for seg, want in zip(e["nlos_ple"], ple):
                if want is None:
                    continue
                checked += 1
                if (seg["n0"], seg["n_inf"], seg["h0"]) != want:
                    bad.append((key, "ple"))
        if nlos is not None:
            checked += 1
            ns = e["nlos_shadow"]
            if (ns["sigma0"], ns["sigma_inf"], ns["h0"]) != nlos:
                bad.append((key, "nlos_shadow"))
    both_regimes = len(entries[("manhattan", "suburban")]["nlos_ple"]) == 2
    ok = not bad and checked >= 12 and both_regimes
    report(1, "table fidelity", ok, f"{checked} rows checked exactly, mismatches={bad}")


# -- 2 ----------------------------------------------------------------------

def test_02_high_altitude_ple(report):
    vals, los = [], []
    for k in LayoutKind:
        for e in Env:
            lsf = builtin_lsf(k, e)
            vals.append(ple_at(1000.0, lsf.nlos.ple))
            los.append(lsf.los.n)
    ok = min(vals) >= 2.4 and max(vals) <= 3.0 and all(n == 2.0 for n in los)
    report(2, "PLE at 1000 m", ok, f"range [{min(vals):.3f}, {max(vals):.3f}], LoS n={set(los)}")


# -- 3 / 4 ------------------------------------------------------------------

MC_HEIGHTS = np.geomspace(5.0, 1000.0, 10).tolist()


@pytest.fixture(scope="module")
def mc_curves():
    curves = {}
    for env in Env:
        cfg = CampaignConfig(env=env, layouts=["combined"], heights_m=MC_HEIGHTS, cities=5, seed=2024)
        curves[env] = empirical_plos(run_campaign(cfg))
    return curves


def test_03_plos_trends(report, mc_curves):
    rhos = {}
    for env, c in mc_curves.items():
        v = c.fit_view()
        rhos[env.value] = stats.spearmanr(v.theta, v.p).statistic
    sub, hr = mc_curves[Env.SUBURBAN], mc_curves[Env.HIGH_RISE]
    shared = sub.valid & hr.valid if len(sub.theta) == len(hr.theta) else None
    if shared is None:
        common = np.intersect1d(np.round(sub.theta[sub.valid], 9), np.round(hr.theta[hr.valid], 9))
        ps = {round(t, 9): p for t, p in zip(sub.theta, sub.p)}
        ph = {round(t, 9): p for t, p in zip(hr.theta, hr.p)}
        frac = np.mean([ps[t] >= ph[t] for t in common])
    else:
        frac = float(np.mean(sub.p[shared] >= hr.p[shared]))
    ok = min(rhos.values()) > 0.95 and frac >= 0.95
    detail = ", ".join(f"rho[{k}]={v:.3f}" for k, v in rhos.items()) + f", suburban>=high-rise on {frac:.1%}"
    report(3, "P_LoS trends", ok, detail)


def test_04_sigmoid_fit_quality(report):
    cfg = CampaignConfig(env="urban", layouts=["manhattan"], heights_m=MC_HEIGHTS, cities=5, seed=2024)
    _, diag = fit_sigmoid(empirical_plos(run_campaign(cfg)))
    worst = 0.0
    theta = np.radians(np.arange(1.0, 90.0, 2.0))
    from a2g.geomlos import PlosCurve
    for k in LayoutKind:
        for e in Env:
            p = sigmoid_plos(theta, builtin_sigmoid(k, e))
            n = np.full(len(theta), 1000)
            fitted, _ = fit_sigmoid(PlosCurve(theta, p, np.round(p * 1000).astype(int), n,
                                              np.ones(len(theta), bool), math.radians(2)))
            worst = max(worst, float(np.abs(sigmoid_plos(theta, fitted) - p).max()))
    ok = diag.rmse < 0.05 and worst < 1e-4
    report(4, "sigmoid fit quality", ok, f"MC Manhattan/Urban RMSE={diag.rmse:.4f}, self-fit max|dP|={worst:.2e}")


# -- 5 / 6 ------------------------------------------------------------------

RT_HEIGHTS = np.geomspace(5.0, 1000.0, 10).tolist()
SUBURBAN_HEIGHTS = np.concatenate([np.geomspace(5.0, 100.0, 5), np.geomspace(150.0, 1000.0, 5)]).tolist()


@pytest.fixture(scope="module")
def roundtrips():
    out = {}
    for env in ("urban", "dense-urban", "high-rise"):
        ds, model = state_split_dataset("combined", env, RT_HEIGHTS, 2000, seed=0)
        out[env] = (extract_all(ds, env=env), model)
    ds, model = state_split_dataset("combined", "suburban", SUBURBAN_HEIGHTS, 2000, seed=0)
    out["suburban"] = (extract_all(ds, env="suburban", breakpoint=100.0), model)
    return out


def test_05_extraction_roundtrip(report, roundtrips):
    parts, ok = [], True
    for env in ("urban", "dense-urban", "high-rise"):
        res, model = roundtrips[env]
        dn = np.abs(ple_at(HEIGHT_GRID, res.lsf.nlos.ple) - ple_at(HEIGHT_GRID, model.lsf.nlos.ple)).max()
        ds = np.abs(shadow_sigma_at(HEIGHT_GRID, res.lsf.nlos.shadow)
                    - shadow_sigma_at(HEIGHT_GRID, model.lsf.nlos.shadow)).max()
        ok &= dn <= 0.1 and ds <= 0.5
        parts.append(f"{env}: |dn|={dn:.3f} |dsigma|={ds:.3f}")
    res, model = roundtrips["suburban"]
    lo = HEIGHT_GRID[HEIGHT_GRID <= 100.0]
    hi = HEIGHT_GRID[HEIGHT_GRID > 100.0]
    dn_lo = np.abs(ple_at(lo, res.lsf.nlos.ple) - ple_at(lo, model.lsf.nlos.ple)).max()
    dn_hi = np.abs(ple_at(hi, res.lsf.nlos.ple) - ple_at(hi, model.lsf.nlos.ple)).max()
    ok &= dn_lo <= 0.1 and dn_hi <= 0.1
    parts.append(f"suburban regimes |dn|={dn_lo:.3f}/{dn_hi:.3f}")
    report(5, "extraction round-trip", ok, "; ".join(parts))


def test_06_fit_quality_parity(report, roundtrips):
    parts, ok = [], True
    for env in ("urban", "dense-urban", "high-rise", "suburban"):
        res, model = roundtrips[env]
        ple_rmse = math.sqrt(np.mean((ple_at(HEIGHT_GRID, res.lsf.nlos.ple)
                                      - ple_at(HEIGHT_GRID, model.lsf.nlos.ple)) ** 2))
        sig_rmse = math.sqrt(np.mean((shadow_sigma_at(HEIGHT_GRID, res.lsf.nlos.shadow)
                                      - shadow_sigma_at(HEIGHT_GRID, model.lsf.nlos.shadow)) ** 2))
        fit_ple = max(res.diagnostics["rmse"]["nlos_ple"])
        fit_sig = res.diagnostics["rmse"]["nlos_sigma"]
        ok &= max(ple_rmse, fit_ple) <= 0.15 and max(sig_rmse, fit_sig) <= 1.0
        parts.append(f"{env}: PLE {ple_rmse:.3f}/{fit_ple:.3f} sigma {sig_rmse:.3f}/{fit_sig:.3f}")
    report(6, "fit-quality parity (vs truth / vs estimates)", ok, "; ".join(parts))


# -- 7 ----------------------------------------------------------------------

def test_07_kl_self_consistency(report):
    geo = random_links(np.geomspace(5.0, 1000.0, 10), 10_000, substream(7, "kl-geometry"))
    urban = builtin_model("combined", "urban")
    a = synthesize(geo, urban, substream(7, "kl", 0), "sigmoid")["pathloss_db"]
    b = synthesize(geo, urban, substream(7, "kl", 1), "sigmoid")["pathloss_db"]
    self_kl = kl_divergence(a, b, bins=100)
    sub = synthesize(geo, builtin_model("combined", "suburban"), substream(7, "kl", 2), "sigmoid")["pathloss_db"]
    hr = synthesize(geo, builtin_model("combined", "high-rise"), substream(7, "kl", 3), "sigmoid")["pathloss_db"]
    cross = kl_divergence(sub, hr, bins=100)
    ok = self_kl < 0.02 and cross > 0.1 and len(a) == 100_000
    report(7, "KL self-consistency", ok, f"self D={self_kl:.5f} nats, suburban||high-rise D={cross:.3f} nats")


# -- 8 ----------------------------------------------------------------------

def test_08_geometry_oracle(report):
    kinds = list(GEOMETRIC_LAYOUTS)
    envs = list(Env)
    total, bad_vec, bad_scalar = 0, 0, 0
    for i in range(10):
        layout = generate_layout(kinds[i % 4], envs[(i // 4 + i) % 4], 1000.0, seed=88, index=(i,))
        boxes = layout.footprints
        rng = substream(88, "oracle", i)
        abs_xyz, gu = random_links_outside(boxes, 1000.0, 60_000, rng)
        abs_xyz, gu = abs_xyz[:10_000], gu[:10_000]
        assert len(gu) == 10_000
        truth = np.array([not brute_blocked(a, g, boxes) for a, g in zip(abs_xyz, gu)])
        fast = np.array([los_mask(boxes, a, g[None])[0] for a, g in zip(abs_xyz, gu)])
        scalar = np.array([is_los(layout, Position3D(*a), Position3D(*g)) for a, g in zip(abs_xyz, gu)])
        bad_vec += int((fast != truth).sum())
        bad_scalar += int((scalar != truth).sum())
        total += len(truth)
    ok = bad_vec == 0 and bad_scalar == 0
    report(8, "geometry oracle", ok, f"{total} links over 10 layouts, disagreements vec={bad_vec} scalar={bad_scalar}")


# -- 9 ----------------------------------------------------------------------

def test_09_distributional_checks(report):
    h = sample_height(15.0, substream(9, "heights"), 100_000)
    ks = stats.kstest(h, stats.rayleigh(scale=15.0).cdf)
    total = 0.5e6
    worst_sum = 0.0
    for k in range(20):
        a = dirichlet_areas(150, total, substream(9, "dirichlet", k))
        worst_sum = max(worst_sum, abs(a.sum() - total) / total)
    overlap, hw_hit, n_layouts = 0.0, 0.0, 0
    rotated = [Highway(500.0, 500.0, 30.0, 600.0, math.pi / 4)]
    for i in range(100):
        env = list(Env)[i % 4]
        if i % 2 == 0:
            layout = generate_layout("fuu", env, 1000.0, seed=9, index=(i,))
        else:
            hws = rotated if i % 4 == 3 else default_highways(1000.0)
            layout = generate_layout("heu", env, 1000.0, seed=9, index=(i,), highways=hws)
            hw_hit += highway_overlap(layout)
        overlap = max(overlap, max_pairwise_overlap(layout))
        n_layouts += 1
    ok = ks.pvalue > 0.01 and worst_sum <= 1e-9 and overlap == 0.0 and hw_hit == 0.0
    report(9, "distributional checks", ok,
           f"KS p={ks.pvalue:.3f}, Dirichlet rel err={worst_sum:.1e}, "
           f"{n_layouts} layouts max overlap={overlap} highway overlap={hw_hit}")


# -- 10 ---------------------------------------------------------------------

def _run(args, cwd, threads_env=None):
    env = dict(os.environ)
    env.pop("A2G_SEED", None)
    return subprocess.run([sys.executable, "-m", "a2g.cli", *args], cwd=cwd, env=env,
                          capture_output=True, text=True, check=True)


def test_10_determinism(report, tmp_path):
    cfg = {"env": "urban", "layouts": ["combined"], "pitch_m": 50.0, "cities": 4,
           "heights": {"count": 12, "min": 20, "max": 800, "spacing": "log"}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    digests = {}
    for tag, threads in (("a", 1), ("b", 1), ("c", 8)):
        d = tmp_path / tag
        d.mkdir()
        _run(["gen", "--layout", "fuu", "--env", "high-rise", "--seed", "42", "-o", "city.json"], d)
        _run(["campaign", "--config", "../c.json", "--seed", "7", "--threads", str(threads),
              "-o", "links.csv", "--plos", "plos.csv"], d)
        _run(["fit-plos", "links.csv", "--min-count", "20", "-o", "sigmoid.json"], d)
        _run(["synth", "--layout", "combined", "--env", "urban", "--links", "links.csv", "--seed", "7",
              "-o", "synth.csv"], d)
        _run(["extract", "synth.csv", "--env", "urban", "-o", "params.json", "--curves", "curves.csv"], d)
        _run(["validate", "synth.csv", "--model", "params.json", "--layout", "combined", "--seed", "7",
              "-o", "report.json", "--cdf-dir", "cdf"], d)
        digests[tag] = {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
    same_runs = digests["a"] == digests["b"]
    same_threads = digests["a"] == digests["c"]
    ok = same_runs and same_threads and len(digests["a"]) >= 13
    report(10, "determinism", ok,
           f"{len(digests['a'])} files, rerun identical={same_runs}, threads 1 vs 8 identical={same_threads}")
