"""Acceptance gate: one test and one PASS/FAIL summary line per criterion."""

import json
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from singular_em import constants as C
from singular_em import estimates as E
from singular_em import harness as H
from singular_em import models as M
from singular_em import regularity as R
from singular_em.cli import main as cli_main
from singular_em.engine import ladder_path_errors
from singular_em.models import AssumptionData
from singular_em.randomness import GridSpec, coarsen, generate_table

LADDER_4_9 = tuple(2.0**-j for j in range(4, 10))


def test_01_coupling_exactness(acceptance):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        seed = int(rng.integers(0, 2**63))
        path = int(rng.integers(0, 2**32))
        m = int(rng.integers(1, 4))
        table = generate_table(seed, path, GridSpec(float(rng.uniform(0.1, 5.0)), 64), m)
        for factor in (2, 4, 8):
            coarse = coarsen(table, factor).increments
            for k in range(64 // factor):
                for c in range(m):
                    acc = 0.0
                    for v in table.increments[k * factor : (k + 1) * factor, c]:
                        acc += float(v)
                    mismatches += acc != coarse[k, c]
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 1.0
    assert acceptance("1", ok, f"mismatched coarse increments = {mismatches}, {elapsed:.2f} s (< 1 s)")


def test_02_exact_scheme_oracle(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for model in (M.zero_drift(1), M.zero_drift(2)):
        grid = GridSpec(1.0, 2**10)
        errs = ladder_path_errors(model, np.zeros(model.dim_d), grid, [2, 4, 8, 16, 32, 64], 1.0, 200, 3)
        worst = max(worst, float(np.max(errs)))
    elapsed = time.perf_counter() - t0
    ok = worst == 0.0 and elapsed < 1.0
    assert acceptance("2", ok, f"max coupled sup error = {worst!r}, {elapsed:.2f} s (< 1 s)")


def test_03_gbm_order_half(acceptance):
    t0 = time.perf_counter()
    config = H.StudyConfig(model_label="gbm", x0=(1.0,), T=1.0, delta_ladder=LADDER_4_9, n_paths=10_000, seed=11)
    fit = H.run_convergence(config)
    elapsed = time.perf_counter() - t0
    ok = 0.4 <= fit.slope <= 0.6 and elapsed < 60
    assert acceptance("3", ok, f"terminal L1 slope = {fit.slope:.4f} in [0.4, 0.6], {elapsed:.1f} s (< 60 s)")


def _indicator_config(**kw):
    return H.StudyConfig(model_label="indicator-1d", delta_ladder=LADDER_4_9, ref_refinement=16, beta=1.0,
                         n_paths=10_000, seed=5, **kw)


def test_04_indicator_rate(acceptance):
    t0 = time.perf_counter()
    fit = H.run_convergence(_indicator_config())
    decreasing, bad = H.decreasing_within(fit, 2.0)
    elapsed = time.perf_counter() - t0
    ok = fit.theoretical_rate == 0.25 and fit.slope >= 0.20 and decreasing and elapsed < 300
    means = ", ".join(f"{m:.4g}" for m in fit.means)
    assert acceptance("4", ok, f"slope = {fit.slope:.4f} >= 0.20 (rate 0.25), decreasing = {decreasing}, "
                               f"errors [{means}], {elapsed:.1f} s (< 300 s)")


def test_05_truncated_mode(acceptance):
    t0 = time.perf_counter()
    base = H.run_convergence(_indicator_config())
    trunc = H.run_convergence(_indicator_config(truncation_mode="derived"))
    z = [abs(a - b) / math.hypot(sa, sb) if (sa or sb) else (0.0 if a == b else math.inf)
         for (_, a, sa), (_, b, sb) in zip(base.points, trunc.points)]
    within = all(v <= 2.0 for v in z)
    k_hand = C.truncation_level(2, 1, 1.0, 1.0, 2.0, math.exp(-1))
    elapsed = time.perf_counter() - t0
    ok = within and abs(k_hand - 4.0) < 1e-12 and elapsed < 300
    ks = ", ".join(f"{k:.3f}" for k in trunc.truncation_levels)
    assert acceptance("5", ok, f"max |diff|/sigma = {max(z):.3g} (<= 2), k(delta) = [{ks}], "
                               f"k(e^-1; q=2,d=1,lu=1,T=1,alpha=2) = {k_hand!r}, {elapsed:.1f} s (< 300 s)")


def test_06_drift_increment_scaling(acceptance):
    t0 = time.perf_counter()
    ind = E.drift_increment_rate(M.get_model("indicator-1d"), LADDER_4_9, 10_000, 13)
    sn = E.drift_increment_rate(M.sin_drift(), LADDER_4_9, 10_000, 13)
    elapsed = time.perf_counter() - t0
    ok = ind.fit.slope >= 0.4 and sn.fit.slope >= 0.9 and elapsed < 180
    assert acceptance("6", ok, f"indicator exponent = {ind.fit.slope:.4f} (>= 0.4), sin exponent = "
                               f"{sn.fit.slope:.4f} (>= 0.9), {elapsed:.1f} s (< 180 s)")


def test_07_density_bound(acceptance):
    t0 = time.perf_counter()
    dc = E.density_check(M.get_model("indicator-1d"), GridSpec(1.0, 64), 0, 0.5, 100_000, 200, 17)
    elapsed = time.perf_counter() - t0
    ok = dc.violations == 0 and len(dc.bins) == 200 and elapsed < 120
    assert acceptance("7", ok, f"violating bins = {dc.violations} of {len(dc.bins)}, {elapsed:.1f} s (< 120 s)")


def test_08_khasminskii_bound(acceptance):
    t0 = time.perf_counter()
    model = M.get_model("indicator-1d")
    a = model.assumptions
    f = M.indicator_field(0.0, 1.0, a.horizon_T, a.p, a.q)
    reports = [E.khasminskii_mc(model, f, lam, GridSpec(1.0, 256), 10_000, 19) for lam in (0.5, 1.0, 2.0)]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reports) and elapsed < 120
    detail = "; ".join(f"lam={r.lam}: {r.exp_mean:.4f}+{r.exp_ci95:.3f} <= 2^{mpmath.nstr(r.log2_exp_bound, 4)}"
                       for r in reports)
    assert acceptance("8", ok, f"{detail}, {elapsed:.1f} s (< 120 s)")


def test_09_constants(acceptance, data_dir):
    t0 = time.perf_counter()
    cs = np.linspace(0.0, 5.0, 100)
    ml_err = 0.0
    for c in cs:
        ref = mpmath.exp(mpmath.mpf(c) ** 2) * (1 + mpmath.erf(c))
        ml_err = max(ml_err, float(abs(C.mittag_leffler_half(c) / ref - 1)))
    g0 = C.gamma0(2, 4, 1)
    k0, _ = C.kappa0_lambda3(1, 1.0, 1.0, 0.0, 1.0)
    golden = json.loads((data_dir / "golden_constants.json").read_text())
    worst = 0.0
    for case in golden.values():
        inp = {k: float(Fraction(v)) for k, v in case["inputs"].items()}
        a = AssumptionData(b_sup=inp["b"], l0=inp["l0"], lambda_lower=inp["ll"], lambda_upper=inp["lu"], alpha=1.0,
                           p=inp["p"], q=inp["q"], horizon_T=inp["T"])
        rep = C.constants_report(a, int(inp["d"]), int(inp["m"]))
        for name in C.ConstantsReport.VALUE_FIELDS:
            want = C.mp.mpf(case["values"][name])
            got = getattr(rep, name)
            err = abs(got - want) / abs(want) if want != 0 else (0.0 if got == 0 else math.inf)
            worst = max(worst, float(err))
    elapsed = time.perf_counter() - t0
    ok = ml_err <= 1e-10 and g0 == 2 and k0 == 100 and worst <= 1e-12 and elapsed < 1.0
    assert acceptance("9", ok, f"ML rel err = {ml_err:.2e}, gamma0 = {g0}, kappa0 = {k0}, "
                               f"golden rel err = {worst:.2e}, {elapsed:.2f} s (< 1 s)")


def test_10a_alpha_fits(acceptance):
    t0 = time.perf_counter()
    offsets = [2.0**-j for j in range(2, 7)]
    ind = R.fit_alpha(M.get_model("indicator-1d"), 1, [0.25, 0.5, 1.0], offsets)
    sn = R.fit_alpha(M.sin_drift(), 1, [0.25, 0.5, 1.0], offsets)
    elapsed = time.perf_counter() - t0
    ok = 0.9 <= ind.alpha_hat <= 1.1 and 1.8 <= sn.alpha_hat <= 2.1 and elapsed < 60
    assert acceptance("10a", ok, f"alpha_hat indicator = {ind.alpha_hat:.4f} in [0.9, 1.1], "
                                 f"sin = {sn.alpha_hat:.4f} in [1.8, 2.1], {elapsed:.2f} s")


def test_10b_gagliardo_growth(acceptance):
    t0 = time.perf_counter()
    thetas = (0.3, 0.4, 0.45, 0.49)
    vals = [R.gagliardo_seminorm(M.get_model("indicator-1d"), 1, 2.0, th, [(-1.0, 2.0)], 1500) for th in thetas]
    elapsed = time.perf_counter() - t0
    increasing = all(b > a for a, b in zip(vals, vals[1:]))
    growth = vals[-1] / vals[0]
    ok = increasing and growth >= 5.0 and elapsed < 60
    listing = ", ".join(f"{v:.4f}" for v in vals)
    assert acceptance("10b", ok, f"seminorms at theta {thetas} = [{listing}], increasing = {increasing}, "
                                 f"growth = {growth:.3f}x (>= 5x required), {elapsed:.2f} s")


def test_11_fixture_reproducible(acceptance, repo_root, data_dir, tmp_path):
    t0 = time.perf_counter()
    cfg = str(repo_root / "configs" / "indicator.cfg")
    outs, codes = [], []
    for i, threads in enumerate((1, 1, 4)):
        out = tmp_path / f"run{i}.csv"
        codes.append(cli_main(["converge", "--config", cfg, "--out", str(out), "--threads", str(threads)]))
        outs.append(out.read_bytes())
    golden = (data_dir / "indicator_golden.csv").read_bytes()
    elapsed = time.perf_counter() - t0
    identical = all(o == outs[0] for o in outs)
    ok = identical and outs[0] == golden and codes == [0, 0, 0] and elapsed < 300
    assert acceptance("11", ok, f"runs identical = {identical}, matches golden = {outs[0] == golden}, "
                                f"exit codes = {codes}, {elapsed:.1f} s (< 300 s)")
