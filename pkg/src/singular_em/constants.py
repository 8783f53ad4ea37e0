"""Explicit constants of the heat-kernel, Krylov and Khasminskii bounds.

Values are ``mpmath`` numbers at ``WORKING_DPS`` decimal digits.  The
constants are double-exponential in the model bounds (``lambda2`` already
exceeds ``exp(1e14)`` for a unit indicator drift), far outside binary64.
Exponents whose argument exceeds ``EXP_ARG_LIMIT`` are reported as ``inf``;
the Khasminskii bound is also available through its base-2 logarithm, which
stays finite.

Parse of ``lambda1`` (the two-branch maximum)::

    2 * {b/sqrt(ll) + 2 sqrt(d) L0 (lu/ll)^2 + d^(d/2+1) d! (lu/ll)^d L0} * exp(b^2 T / lu)
      max
    {2 sqrt(lu) b + (b^2 + 2 lu L0 sqrt(d)) (sqrt(d) + 2)
       + 2^(m+11) / ll * (L0 + 2b) * ((b^3 + (d lu)^(3/2)) + sqrt(ll) (b^2 + d lu))}
      * 2^((d+1)/2) / ll * exp((b + b^2) T / lu)

with ``b = b_sup``, ``ll = lambda_lower``, ``lu = lambda_upper``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import mpmath

from .errors import AssumptionViolation, DomainError, RangeError
from .models import AssumptionData, SdeModel

__all__ = [
    "WORKING_DPS",
    "ConstantsReport",
    "gamma0",
    "mittag_leffler_half",
    "lambda1",
    "lambda2",
    "kappa0_lambda3",
    "alpha0",
    "khasminskii_bound",
    "khasminskii_log2_bound",
    "onestep_krylov_bound",
    "solution_constants",
    "truncation_level",
    "sup_helper",
    "constants_report",
    "s4_prefactor",
]

WORKING_DPS = 40
mp = mpmath.mp.clone() if hasattr(mpmath.mp, "clone") else mpmath.MPContext()
mp.dps = WORKING_DPS
EXP_ARG_LIMIT = mp.mpf(2) ** 20000
# series below this argument, closed form above (series needs ~2c^2 terms)
SERIES_SWITCH = 12.0


def _exp(x):
    x = mp.mpf(x)
    if x > EXP_ARG_LIMIT:
        return mp.inf
    return mp.exp(x)


def _check_finite(value, where, name):
    if not mp.isfinite(value):
        raise RangeError(where, f"{name} overflows the representable range")
    return value


def gamma0(p: float, q: float, d: int):
    denom = 1 - mp.mpf(1) / q - mp.mpf(d) / (2 * mp.mpf(p))
    if denom <= 0:
        raise AssumptionViolation(
            "constants.gamma0",
            f"(p, q) = ({p}, {q}) with d = {d} is outside the Krylov class: d/(2p) + 1/q >= 1",
        )
    return 1 / denom


def mittag_leffler_half(c):
    """sum_{i>=0} c^i / Gamma(1 + i/2)  (equals exp(c^2) erfc(-c)).

    Summed by the two-chain term recursion t_{i+2} = t_i c^2 / (1 + i/2)
    until past the peak term and below 1e-14 of the partial sum.  Arguments
    above ``SERIES_SWITCH`` use the closed form, where the series would need
    about 2 c^2 terms.
    """
    c = mp.mpf(c)
    if c < 0:
        raise DomainError("constants.mittag_leffler_half", f"argument must be >= 0, got {c}")
    if c == 0:
        return mp.mpf(1)
    if c > SERIES_SWITCH:
        e = _exp(c * c)
        return e * mp.erfc(-c) if mp.isfinite(e) else mp.inf
    c2 = c * c
    even, odd = mp.mpf(1), c / mp.gamma(mp.mpf(3) / 2)
    total = even + odd
    i = 0
    rel = mp.mpf("1e-14")
    while True:
        even = even * c2 / (1 + mp.mpf(i) / 2)
        odd = odd * c2 / (1 + mp.mpf(i + 1) / 2)
        total += even + odd
        i += 2
        if i > 2 * c2 + 2 and even + odd < rel * total:
            return total


def _branches_lambda1(b, l0, ll, lu, d, m, T):
    b, l0, ll, lu, T = (mp.mpf(v) for v in (b, l0, ll, lu, T))
    sd = mp.sqrt(d)
    ratio = lu / ll
    first = b / mp.sqrt(ll) + 2 * sd * l0 * ratio**2 + mp.mpf(d) ** (mp.mpf(d) / 2 + 1) * mp.factorial(d) * ratio**d * l0
    branch1 = 2 * first * _exp(b**2 * T / lu)
    second = (
        2 * mp.sqrt(lu) * b
        + (b**2 + 2 * lu * l0 * sd) * (sd + 2)
        + mp.mpf(2) ** (m + 11) / ll * (l0 + 2 * b) * ((b**3 + (d * lu) ** mp.mpf(1.5)) + mp.sqrt(ll) * (b**2 + d * lu))
    )
    branch2 = second * mp.mpf(2) ** (mp.mpf(d + 1) / 2) / ll * _exp((b + b**2) * T / lu)
    return branch1, branch2


def lambda1(b_sup, l0, lambda_lower, lambda_upper, d, m, T):
    if d > 1000:
        raise RangeError("constants.lambda1", f"d = {d} makes the d! factor unrepresentable")
    b1, b2 = _branches_lambda1(b_sup, l0, lambda_lower, lambda_upper, d, m, T)
    return _check_finite(max(b1, b2), "constants.lambda1", "lambda1")


def lambda2(lambda1_val, T, d, lambda_lower, lambda_upper, b_sup):
    lu, ll = mp.mpf(lambda_upper), mp.mpf(lambda_lower)
    c = mp.mpf(lambda1_val) * mp.sqrt(mp.pi * T) * ((1 + 24 * d) * lu / ll) ** d
    val = _exp(mp.mpf(b_sup) * T / (2 * lu)) * mittag_leffler_half(c)
    return _check_finite(val, "constants.lambda2", "lambda2")


def kappa0_lambda3(d, lambda_upper, lambda_lower, b_sup, lambda2_val):
    kappa = 4 * (1 + 24 * mp.mpf(d)) * mp.mpf(lambda_upper)
    lam3 = mp.mpf(lambda2_val) * _exp(mp.mpf(b_sup) ** 2 / (2 * mp.mpf(lambda_upper))) * (
        kappa / (2 * mp.mpf(lambda_lower))
    ) ** (mp.mpf(d) / 2)
    return kappa, _check_finite(lam3, "constants.kappa0_lambda3", "lambda3")


def alpha0(p, q, d, lambda_lower, lambda_upper, kappa0_val, lambda3_val, gamma0_val):
    p, q = mp.mpf(p), mp.mpf(q)
    if d / p + 2 / q >= 2:
        raise AssumptionViolation("constants.alpha0", f"(p, q) = ({p}, {q}) outside the Krylov class for d = {d}")
    e = mp.mpf(d) / 2 * (1 - 1 / p)
    lead = (1 - 1 / p) ** e / (mp.mpf(lambda_lower) * (2 * mp.pi) ** (1 / p)) ** (mp.mpf(d) / 2)
    brace = mp.mpf(lambda_upper) ** e + mp.mpf(lambda3_val) * (mp.mpf(gamma0_val) * (1 - 1 / q)) ** (
        (q - 1) / q
    ) * (mp.mpf(kappa0_val) / 2) ** e
    return _check_finite(lead * brace, "constants.alpha0", "alpha0")


def khasminskii_log2_bound(lam, norm_fpq, alpha0_val, gamma0_val, T):
    """Base-2 logarithm of the exponential-moment bound: 1 + T (2 lam alpha0 ||f||)^gamma0."""
    if not lam > 0:
        raise DomainError("constants.khasminskii_bound", f"lambda must be > 0, got {lam}")
    return 1 + mp.mpf(T) * (2 * mp.mpf(lam) * mp.mpf(alpha0_val) * mp.mpf(norm_fpq)) ** mp.mpf(gamma0_val)


def khasminskii_bound(lam, norm_fpq, alpha0_val, gamma0_val, T):
    """2^(1 + T (2 lam alpha0 ||f||)^gamma0); ``inf`` when the exponent is out of range.

    Passing the solution-process constant in place of ``alpha0`` gives the
    bound for the exact diffusion.
    """
    log2 = khasminskii_log2_bound(lam, norm_fpq, alpha0_val, gamma0_val, T)
    return _exp(log2 * mp.ln2)


def onestep_krylov_bound(norm_fpq, alpha0_val, gamma0_val, span):
    """alpha0 ||f|| span^(1/gamma0): bound on E int_s^t |f(X_r)| dr for t - s = span."""
    return mp.mpf(alpha0_val) * mp.mpf(norm_fpq) * mp.mpf(span) ** (1 / mp.mpf(gamma0_val))


def solution_constants(b_sup, l0, lambda_lower, lambda_upper, d, T, p):
    """(beta_T, hat_beta_T, hat_alpha0) of the Gaussian bound for the exact diffusion."""
    b, l0, ll, lu, T, p = (mp.mpf(v) for v in (b_sup, l0, lambda_lower, lambda_upper, T, p))
    sd = mp.sqrt(d)
    beta_T = (
        mp.mpf(2) ** (3 * d + 1) * (lu / ll) ** (d + 1) * mp.sqrt(mp.pi * T)
        * (b / mp.sqrt(lu) + l0 * (d + 2 * sd)) * _exp(b**2 * T / (4 * lu))
    )
    _check_finite(beta_T, "constants.solution_constants", "beta_T")
    hat_beta = _check_finite(
        _exp(b**2 * T / (2 * lu)) * mittag_leffler_half(beta_T), "constants.solution_constants", "hat_beta_T"
    )
    e = mp.mpf(d) / 2 * (1 - 1 / p)
    hat_alpha = (
        (2 * mp.pi) ** (-mp.mpf(d) / (2 * p)) * hat_beta * (8 * (p - 1) / p) ** e
        * (lu ** (1 - 1 / p) / ll) ** (mp.mpf(d) / 2)
    )
    return beta_T, hat_beta, hat_alpha


def truncation_level(q, d, lambda_upper, T, alpha, delta) -> float:
    """Cutoff radius (-8 q d^2 lu T min(1, alpha/2) log delta)^(1/2) balancing the exit tail against delta^rate."""
    if not 0 < delta < 1:
        raise DomainError("constants.truncation_level", f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(-8.0 * q * d * d * lambda_upper * T * min(1.0, alpha / 2.0) * math.log(delta))


def sup_helper(gamma: float, beta_coef: float) -> float:
    """sup_{x >= 0} x^gamma exp(-beta x^2) = (gamma / (2 e beta))^(gamma / 2)."""
    if not (gamma > 0 and beta_coef > 0):
        raise DomainError("constants.sup_helper", "gamma and beta must be positive")
    return (gamma / (2.0 * math.e * beta_coef)) ** (gamma / 2.0)


def s4_prefactor(delta: float, beta: float, alpha: float, d: int, gamma0_val: float, p: float, c2: float = 1.0) -> float:
    """exp(C2 (-(beta/2) min(1, alpha/2) log delta)^(d gamma0 / (2p))) + 1, shape only (C2 = 1 placeholder)."""
    x = -(beta / 2.0) * min(1.0, alpha / 2.0) * math.log(delta)
    return math.exp(c2 * x ** (d * float(gamma0_val) / (2.0 * p))) + 1.0


@dataclass(frozen=True)
class ConstantsReport:
    gamma0: object
    kappa0: object
    lambda1: object
    lambda2: object
    lambda3: object
    alpha0: object
    beta_T: object
    hat_beta_T: object
    hat_alpha0: object
    inputs: AssumptionData
    d: int
    m: int
    lambda1_parse: str = "2{...}e^(b^2T/lu) max {...}2^((d+1)/2)/ll e^((b+b^2)T/lu)"

    VALUE_FIELDS = ("gamma0", "kappa0", "lambda1", "lambda2", "lambda3", "alpha0", "beta_T", "hat_beta_T", "hat_alpha0")

    def values(self) -> dict:
        return {k: getattr(self, k) for k in self.VALUE_FIELDS}

    def as_text(self, digits: int = 15) -> str:
        width = max(len(k) for k in self.VALUE_FIELDS)
        lines = [f"{k.ljust(width)} = {mp.nstr(v, digits)}" for k, v in self.values().items()]
        a = self.inputs
        lines.append(
            f"{'inputs'.ljust(width)} = d={self.d} m={self.m} b_sup={a.b_sup} l0={a.l0} "
            f"lambda_lower={a.lambda_lower} lambda_upper={a.lambda_upper} p={a.p} q={a.q} T={a.horizon_T}"
        )
        lines.append(f"{'lambda1_parse'.ljust(width)} = {self.lambda1_parse}")
        return "\n".join(lines)

    def as_record(self, digits: int = 30) -> dict:
        rec = {k: mp.nstr(v, digits) for k, v in self.values().items()}
        rec["inputs"] = {f.name: getattr(self.inputs, f.name) for f in fields(self.inputs)}
        rec["inputs"].update(d=self.d, m=self.m)
        rec["lambda1_parse"] = self.lambda1_parse
        return rec


def constants_report(assumptions: AssumptionData, d: int, m: int) -> ConstantsReport:
    a = assumptions
    if not math.isfinite(a.b_sup):
        raise AssumptionViolation("constants.constants_report", "drift bound b_sup is infinite")
    T = a.horizon_T
    g0 = gamma0(a.p, a.q, d)
    l1 = lambda1(a.b_sup, a.l0, a.lambda_lower, a.lambda_upper, d, m, T)
    l2 = lambda2(l1, T, d, a.lambda_lower, a.lambda_upper, a.b_sup)
    k0, l3 = kappa0_lambda3(d, a.lambda_upper, a.lambda_lower, a.b_sup, l2)
    a0 = alpha0(a.p, a.q, d, a.lambda_lower, a.lambda_upper, k0, l3, g0)
    bT, hbT, ha0 = solution_constants(a.b_sup, a.l0, a.lambda_lower, a.lambda_upper, d, T, a.p)
    return ConstantsReport(g0, k0, l1, l2, l3, a0, bT, hbT, ha0, a, d, m)


def model_constants(model: SdeModel) -> ConstantsReport:
    return constants_report(model.assumptions, model.dim_d, model.noise_dim_m)
