"""Freeze golden values for the constants report.

Independent evaluation: every constant is rebuilt as a sympy expression with
exact rational inputs and evaluated at 60 digits; the Mittag-Leffler factor
uses the closed form exp(c^2) erfc(-c) instead of the series.

    python scripts/golden_constants.py  # rewrites tests/data/golden_constants.json
"""

import json
from pathlib import Path

import sympy as sp

DIGITS = 60

CASES = {
    # d = m = 1, all bounds equal to one
    "reference": dict(d=1, m=1, b=1, l0=1, ll=1, lu=1, T=1, p=2, q=4),
    # the catalog indicator drift: unit diffusion, so no Lipschitz term
    "indicator-1d": dict(d=1, m=1, b=1, l0=0, ll=1, lu=1, T=1, p=2, q=4),
    "anisotropic-2d": dict(d=2, m=2, b=sp.Rational(1, 2), l0=sp.Rational(1, 4), ll=sp.Rational(1, 2), lu=1,
                           T=sp.Rational(1, 2), p=4, q=4),
    "zero-drift": dict(d=1, m=1, b=0, l0=0, ll=1, lu=1, T=1, p=2, q=4),
}


def ml_half(c):
    return sp.exp(c**2) * sp.erfc(-c)


def evaluate(d, m, b, l0, ll, lu, T, p, q):
    d, m, b, l0, ll, lu, T, p, q = (sp.nsimplify(v) for v in (d, m, b, l0, ll, lu, T, p, q))
    g0 = 1 / (1 - 1 / q - d / (2 * p))
    left = 2 * (b / sp.sqrt(ll) + 2 * sp.sqrt(d) * l0 * (lu / ll) ** 2
                + d ** (d / 2 + 1) * sp.factorial(d) * (lu / ll) ** d * l0) * sp.exp(b**2 * T / lu)
    right = (2 * sp.sqrt(lu) * b + (b**2 + 2 * lu * l0 * sp.sqrt(d)) * (sp.sqrt(d) + 2)
             + 2 ** (m + 11) / ll * (l0 + 2 * b) * ((b**3 + (d * lu) ** sp.Rational(3, 2)) + sp.sqrt(ll) * (b**2 + d * lu))
             ) * 2 ** ((d + 1) / 2) / ll * sp.exp((b + b**2) * T / lu)
    l1 = sp.Max(sp.N(left, DIGITS), sp.N(right, DIGITS))
    c = l1 * sp.sqrt(sp.pi * T) * ((1 + 24 * d) * lu / ll) ** d
    l2 = sp.exp(b * T / (2 * lu)) * ml_half(c)
    k0 = 4 * (1 + 24 * d) * lu
    l3 = l2 * sp.exp(b**2 / (2 * lu)) * (k0 / (2 * ll)) ** (d / 2)
    e = d / 2 * (1 - 1 / p)
    a0 = (1 - 1 / p) ** e / (ll * (2 * sp.pi) ** (1 / p)) ** (d / 2) * (
        lu**e + l3 * (g0 * (1 - 1 / q)) ** ((q - 1) / q) * (k0 / 2) ** e)
    bT = 2 ** (3 * d + 1) * (lu / ll) ** (d + 1) * sp.sqrt(sp.pi * T) * (
        b / sp.sqrt(lu) + l0 * (d + 2 * sp.sqrt(d))) * sp.exp(b**2 * T / (4 * lu))
    hbT = sp.exp(b**2 * T / (2 * lu)) * ml_half(bT)
    ha0 = (2 * sp.pi) ** (-d / (2 * p)) * hbT * (8 * (p - 1) / p) ** e * (lu ** (1 - 1 / p) / ll) ** (d / 2)
    vals = dict(gamma0=g0, kappa0=k0, lambda1=l1, lambda2=l2, lambda3=l3, alpha0=a0,
                beta_T=bT, hat_beta_T=hbT, hat_alpha0=ha0)
    return {k: str(sp.N(v, DIGITS)) for k, v in vals.items()}


def main():
    out = {}
    for name, inputs in CASES.items():
        out[name] = {"inputs": {k: str(v) for k, v in inputs.items()}, "values": evaluate(**inputs)}
        print(name, out[name]["values"])
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "golden_constants.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print("wrote", path)


if __name__ == "__main__":
    main()
