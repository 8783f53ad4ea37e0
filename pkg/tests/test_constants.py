import json
import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from singular_em import constants as C
from singular_em import models as M
from singular_em.errors import AssumptionViolation, DomainError, RangeError

mp = C.mp


def _golden(data_dir):
    return json.loads((data_dir / "golden_constants.json").read_text())


def _report(inputs):
    v = {k: float(Fraction(s)) for k, s in inputs.items()}
    a = M.AssumptionData(b_sup=v["b"], l0=v["l0"], lambda_lower=v["ll"], lambda_upper=v["lu"], alpha=1.0,
                         p=v["p"], q=v["q"], horizon_T=v["T"])
    return C.constants_report(a, int(v["d"]), int(v["m"]))


@pytest.mark.parametrize("case", ["reference", "indicator-1d", "anisotropic-2d", "zero-drift"])
def test_report_matches_golden(case, data_dir):
    entry = _golden(data_dir)[case]
    rep = _report(entry["inputs"])
    for name in C.ConstantsReport.VALUE_FIELDS:
        want = mp.mpf(entry["values"][name])
        got = getattr(rep, name)
        if want == 0:
            assert got == 0, name
        else:
            assert abs(got / want - 1) < mp.mpf("1e-12"), name


def test_catalog_indicator_matches_golden_case(data_dir):
    rep = C.model_constants(M.get_model("indicator-1d"))
    want = mp.mpf(_golden(data_dir)["indicator-1d"]["values"]["alpha0"])
    assert abs(rep.alpha0 / want - 1) < mp.mpf("1e-12")


def test_gamma0_and_kappa0_exact():
    assert C.gamma0(2, 4, 1) == 2
    k0, _ = C.kappa0_lambda3(1, 1.0, 1.0, 0.0, 1.0)
    assert k0 == 100


def test_gamma0_outside_class():
    with pytest.raises(AssumptionViolation):
        C.gamma0(1.0, 2.0, 1)


@pytest.mark.parametrize("c", [0.0, 0.5, 3.0, 11.99, 12.01, 20.0])
def test_mittag_leffler_closed_form(c):
    ref = mpmath.exp(mpmath.mpf(c) ** 2) * mpmath.erfc(-mpmath.mpf(c))
    assert abs(C.mittag_leffler_half(c) / ref - 1) < 1e-12


def test_mittag_leffler_domain():
    assert C.mittag_leffler_half(0) == 1
    with pytest.raises(DomainError):
        C.mittag_leffler_half(-0.1)


@given(st.floats(0, 30), st.floats(0, 30))
def test_mittag_leffler_increasing(a, b):
    lo, hi = sorted((a, b))
    assert C.mittag_leffler_half(lo) <= C.mittag_leffler_half(hi)


def test_khasminskii_limit_small_lambda():
    log2 = C.khasminskii_log2_bound(1e-12, 1.0, 10.0, 2.0, 1.0)
    assert abs(log2 - 1) < 1e-18
    assert abs(C.khasminskii_bound(1e-12, 1.0, 10.0, 2.0, 1.0) - 2) < 1e-15
    with pytest.raises(DomainError):
        C.khasminskii_log2_bound(0.0, 1.0, 1.0, 2.0, 1.0)


def test_khasminskii_bound_overflows_to_inf_but_log_stays_finite():
    rep = C.model_constants(M.get_model("indicator-1d"))
    log2 = C.khasminskii_log2_bound(1.0, 1.0, rep.alpha0, rep.gamma0, 1.0)
    assert mp.isfinite(log2)
    assert C.khasminskii_bound(1.0, 1.0, rep.alpha0, rep.gamma0, 1.0) == mp.inf


def test_onestep_bound():
    assert C.onestep_krylov_bound(0.0, 5.0, 2.0, 1.0) == 0
    assert C.onestep_krylov_bound(2.0, 3.0, 2.0, 4.0) == 12


def test_truncation_level_hand_value():
    assert C.truncation_level(2, 1, 1.0, 1.0, 2.0, math.exp(-1)) == pytest.approx(4.0, abs=1e-14)
    # alpha above 2 is capped at the Lipschitz rate
    assert C.truncation_level(2, 1, 1.0, 1.0, 3.0, math.exp(-1)) == C.truncation_level(2, 1, 1.0, 1.0, 2.0, math.exp(-1))
    with pytest.raises(DomainError):
        C.truncation_level(2, 1, 1.0, 1.0, 2.0, 1.0)


@given(st.floats(0.1, 5), st.floats(0.1, 5))
def test_sup_helper_matches_numeric_max(gamma, beta):
    res = minimize_scalar(lambda x: -(x**gamma) * math.exp(-beta * x * x), bounds=(0, 20), method="bounded",
                          options={"xatol": 1e-12})
    assert C.sup_helper(gamma, beta) == pytest.approx(-res.fun, rel=1e-7)


def test_s4_prefactor_shape():
    rep = C.model_constants(M.get_model("indicator-1d"))
    vals = [C.s4_prefactor(2.0**-j, 1.0, 1.0, 1, float(rep.gamma0), 2.0) for j in range(4, 10)]
    assert all(math.isfinite(v) and v > 1 for v in vals)
    prod = [v * (2.0**-j) ** 0.25 for v, j in zip(vals, range(4, 10))]
    assert all(b < a for a, b in zip(prod, prod[1:]))


def test_report_text_and_record():
    rep = C.model_constants(M.get_model("indicator-1d"))
    text = rep.as_text()
    for name in C.ConstantsReport.VALUE_FIELDS:
        assert name in text
    rec = rep.as_record()
    assert set(C.ConstantsReport.VALUE_FIELDS) <= set(rec)
    assert rec["inputs"]["d"] == 1


def test_unbounded_drift_rejected():
    with pytest.raises(AssumptionViolation):
        C.model_constants(M.gbm())


def test_overflow_is_a_range_error():
    a = M.AssumptionData(b_sup=1e4, l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=1.0)
    with pytest.raises(RangeError):
        C.constants_report(a, 1, 1)


def test_lambda1_keeps_larger_branch():
    b1, b2 = C._branches_lambda1(1, 1, 1, 1, 1, 1, 1)
    assert C.lambda1(1, 1, 1, 1, 1, 1, 1) == max(b1, b2)
