"""Drift/diffusion catalog with assumption metadata and the radial drift cutoff.

Evaluator contract: ``drift`` maps an array of shape ``(..., d)`` to
``(..., d)``; ``diffusion`` maps ``(..., d)`` to ``(..., d, m)``.  Both are
pure and vectorised over the leading axes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import AssumptionViolation, ConfigurationError

__all__ = [
    "AssumptionData",
    "SdeModel",
    "ScalarField",
    "indicator_drift",
    "sin_drift",
    "zero_drift",
    "constant_drift",
    "gbm",
    "indicator_box_2d",
    "cutoff",
    "truncate_drift",
    "truncated_lp_bound",
    "builtin_models",
    "get_model",
    "check_assumptions",
    "indicator_field",
    "constant_field",
    "zero_field",
    "lpq_norm_quadrature",
]


@dataclass(frozen=True)
class AssumptionData:
    """Bounds for the drift/diffusion pair.

    ``b_sup`` is the sup norm of the drift, ``l0`` the Lipschitz constant of
    the diffusion (Hilbert-Schmidt), ``lambda_lower``/``lambda_upper`` the
    ellipticity bounds of ``sigma sigma^T``, ``alpha`` the exponent of the
    Gaussian-smoothed L2 modulus, and ``(p, q)`` the integrability exponents
    used by the occupation-time bounds.
    """

    b_sup: float
    l0: float
    lambda_lower: float
    lambda_upper: float
    alpha: float
    p: float = 2.0
    q: float = 4.0
    horizon_T: float = 1.0

    def __post_init__(self):
        where = "models.AssumptionData"
        if not self.b_sup >= 0:
            raise ConfigurationError(where, f"b_sup must be >= 0, got {self.b_sup}")
        if not self.l0 >= 0:
            raise ConfigurationError(where, f"l0 must be >= 0, got {self.l0}")
        if not self.lambda_lower > 0:
            raise ConfigurationError(where, f"lambda_lower must be > 0, got {self.lambda_lower}")
        if not self.lambda_upper >= self.lambda_lower:
            raise ConfigurationError(where, "lambda_upper must be >= lambda_lower")
        if not self.alpha > 0:
            raise ConfigurationError(where, f"alpha must be > 0, got {self.alpha}")
        if not (self.p > 1 and self.q > 1):
            raise ConfigurationError(where, f"p and q must exceed 1, got p={self.p}, q={self.q}")
        if not self.horizon_T > 0:
            raise ConfigurationError(where, f"horizon_T must be > 0, got {self.horizon_T}")

    def in_krylov_class(self, d: int) -> bool:
        return d / self.p + 2.0 / self.q < 2.0


@dataclass(frozen=True, eq=False)
class SdeModel:
    dim_d: int
    noise_dim_m: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    assumptions: AssumptionData
    label: str
    oracle_only: bool = False
    # |b|^2 in L^p; bounded drifts without it are covered only via truncation
    square_integrable: bool = True
    # per-axis coordinates where the drift jumps, for split quadrature
    breakpoints: Optional[tuple] = None
    # (x0, t, w_t) -> x_t for models with a closed-form strong solution
    exact_solution: Optional[Callable] = None
    description: str = ""
    params: dict = field(default_factory=dict)


def _unit_diffusion(d: int, m: int, scale: float = 1.0):
    eye = np.eye(d, m) * scale

    def diffusion(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(eye, x.shape[:-1] + (d, m)).copy()

    return diffusion


def indicator_drift(a1: float, a2: float) -> SdeModel:
    """b = 1 on the closed interval [a1, a2], 0 elsewhere; d = m = 1, sigma = 1."""
    if not a1 < a2:
        raise ConfigurationError("models.indicator_drift", f"need a1 < a2, got [{a1}, {a2}]")

    def drift(x):
        x = np.asarray(x, dtype=float)
        return ((x >= a1) & (x <= a2)).astype(float)

    return SdeModel(
        1, 1, drift, _unit_diffusion(1, 1),
        AssumptionData(b_sup=1.0, l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=1.0),
        label="indicator-1d" if (a1, a2) == (0.0, 1.0) else f"indicator[{a1},{a2}]",
        breakpoints=((float(a1), float(a2)),),
        description="indicator drift on a closed interval, unit diffusion",
        params={"a1": float(a1), "a2": float(a2)},
    )


def sin_drift() -> SdeModel:
    return SdeModel(
        1, 1, lambda x: np.sin(np.asarray(x, dtype=float)), _unit_diffusion(1, 1),
        AssumptionData(b_sup=1.0, l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=2.0),
        label="sin",
        square_integrable=False,
        description="b(x) = sin(x), Lipschitz and bounded, unit diffusion",
    )


def zero_drift(d: int = 1) -> SdeModel:
    return SdeModel(
        d, d, lambda x: np.zeros_like(np.asarray(x, dtype=float)), _unit_diffusion(d, d),
        AssumptionData(b_sup=0.0, l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=2.0),
        label="zero" if d == 1 else f"zero-{d}d",
        breakpoints=None,
        description="pure Brownian motion",
    )


def constant_drift(c: float = 1.0) -> SdeModel:
    return SdeModel(
        1, 1, lambda x: np.full_like(np.asarray(x, dtype=float), c), _unit_diffusion(1, 1),
        AssumptionData(b_sup=abs(c), l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=2.0),
        label="constant",
        square_integrable=c == 0,
        description=f"b = {c}, unit diffusion",
        params={"c": c},
    )


def gbm(mu: float = 0.05, sigma: float = 0.2) -> SdeModel:
    """Geometric Brownian motion; unbounded drift, used only as a closed-form oracle."""

    def exact(x0, t, w):
        return x0 * np.exp((mu - 0.5 * sigma**2) * t + sigma * w)

    return SdeModel(
        1, 1,
        lambda x: mu * np.asarray(x, dtype=float),
        lambda x: sigma * np.asarray(x, dtype=float)[..., None],
        # the bounds below hold only on the unit ball; never used for checks
        AssumptionData(b_sup=math.inf, l0=sigma, lambda_lower=sigma**2, lambda_upper=sigma**2, alpha=2.0),
        label="gbm",
        oracle_only=True,
        square_integrable=False,
        exact_solution=exact,
        description=f"dX = {mu} X dt + {sigma} X dW",
        params={"mu": mu, "sigma": sigma},
    )


def indicator_box_2d() -> SdeModel:
    """b = (1, 1)/sqrt(2) on the closed unit square, 0 elsewhere; sigma = I_2."""
    direction = np.array([1.0, 1.0]) / math.sqrt(2.0)

    def drift(x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        return inside[..., None] * direction

    return SdeModel(
        2, 2, drift, _unit_diffusion(2, 2),
        AssumptionData(b_sup=1.0, l0=0.0, lambda_lower=1.0, lambda_upper=1.0, alpha=1.0, p=2.0, q=4.0),
        label="indicator-box-2d",
        breakpoints=((0.0, 1.0), (0.0, 1.0)),
        description="indicator of the unit square times a unit vector, identity diffusion",
    )


def cutoff(r):
    """1 on [0, 1], 0 on [2, inf), quintic smoothstep in between (C^2)."""
    u = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def truncate_drift(model: SdeModel, k: float) -> SdeModel:
    """Drift ``b(x) * cutoff(|x| / k)``; agrees with ``b`` on ``|x| <= k``."""
    if not (k > 0):
        raise ConfigurationError("models.truncate_drift", f"radius k must be > 0, got {k}")
    base = model.drift

    def drift(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1)) / k
        return base(x) * cutoff(r)[..., None]

    return replace(
        model,
        drift=drift,
        label=f"{model.label}|k={k:.6g}",
        square_integrable=True,
        exact_solution=None,
        params={**model.params, "k": float(k)},
    )


def truncated_lp_bound(k: float, b_sup: float, d: int, p: float) -> float:
    """Upper bound on the L^p norm of |b_k|^2: (ball-volume of radius 2)^(1/p) k^(d/p) b_sup^2."""
    if not k > 0:
        raise ConfigurationError("models.truncated_lp_bound", f"k must be > 0, got {k}")
    if not p >= 1:
        raise ConfigurationError("models.truncated_lp_bound", f"p must be >= 1, got {p}")
    vol = 2.0**d * math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return vol ** (1.0 / p) * k ** (d / p) * b_sup**2


def builtin_models() -> list[SdeModel]:
    return [
        zero_drift(),
        constant_drift(1.0),
        indicator_drift(0.0, 1.0),
        sin_drift(),
        gbm(),
        indicator_box_2d(),
    ]


def get_model(label: str) -> SdeModel:
    catalog = {m.label: m for m in builtin_models()}
    try:
        return catalog[label]
    except KeyError:
        raise ConfigurationError(
            "models.get_model", f"unknown model {label!r}; available: {', '.join(sorted(catalog))}"
        ) from None


def check_assumptions(model: SdeModel, *, n_probe: int = 257, radius: float = 4.0, tol: float = 1e-12):
    """Spot-check boundedness and ellipticity on a deterministic probe set.

    Raises :class:`AssumptionViolation` naming the failed condition.  Models
    flagged ``oracle_only`` are skipped.
    """
    if model.oracle_only:
        return
    a = model.assumptions
    where = "models.check_assumptions"
    if not math.isfinite(a.b_sup):
        raise AssumptionViolation(where, f"{model.label}: drift is not bounded")
    d = model.dim_d
    axis = np.linspace(-radius, radius, n_probe if d == 1 else 33)
    pts = np.array(list(itertools.product(axis, repeat=d)))
    b = model.drift(pts)
    if np.max(np.linalg.norm(b, axis=-1)) > a.b_sup * (1 + tol) + tol:
        raise AssumptionViolation(where, f"{model.label}: |b| exceeds b_sup on probe points")
    sig = model.diffusion(pts)
    a_mat = sig @ np.swapaxes(sig, -1, -2)
    eig = np.linalg.eigvalsh(a_mat)
    if np.min(eig) < a.lambda_lower * (1 - 1e-9) or np.max(eig) > a.lambda_upper * (1 + 1e-9):
        raise AssumptionViolation(where, f"{model.label}: ellipticity bounds fail on probe points")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nonnegative test function f(t, x) with its L^p_q(0, T) norm supplied up front."""

    f: Callable[[float, np.ndarray], np.ndarray]
    lpq_norm: float
    label: str = ""

    def __post_init__(self):
        if not self.lpq_norm >= 0:
            raise ConfigurationError("models.ScalarField", f"lpq_norm must be >= 0, got {self.lpq_norm}")


def indicator_field(a1: float, a2: float, T: float, p: float, q: float) -> ScalarField:
    """f = 1 on [a1, a2] (d = 1); norm (T (a2 - a1)^(q/p))^(1/q) in closed form."""

    def f(t, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return ((x >= a1) & (x <= a2)).astype(float)

    norm = (T * (a2 - a1) ** (q / p)) ** (1.0 / q)
    return ScalarField(f, norm, f"1[{a1},{a2}]")


def constant_field(value: float, box, T: float, p: float, q: float) -> ScalarField:
    """f = value everywhere; the norm is taken over ``box`` (a list of (lo, hi))."""
    vol = float(np.prod([hi - lo for lo, hi in box]))
    norm = abs(value) * (T * vol ** (q / p)) ** (1.0 / q)

    def f(t, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], float(value))

    return ScalarField(f, norm, f"const={value}")


def zero_field() -> ScalarField:
    return ScalarField(lambda t, x: np.zeros(np.asarray(x).shape[:-1]), 0.0, "zero")


def lpq_norm_quadrature(f, box, T: float, p: float, q: float, n_nodes: int = 64, n_time: int = 16) -> float:
    """||f||_{L^p_q(0,T)} over ``box`` by tensor-product Gauss-Legendre quadrature."""
    xs, ws = np.polynomial.legendre.leggauss(n_nodes)
    axes, weights = [], []
    for lo, hi in box:
        axes.append(0.5 * (hi - lo) * xs + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * ws)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    w = np.ones(1)
    for wk in weights:
        w = np.multiply.outer(w, wk).ravel()
    ts, wt = np.polynomial.legendre.leggauss(n_time)
    ts = 0.5 * T * (ts + 1.0)
    wt = 0.5 * T * wt
    inner = np.array([np.sum(w * np.abs(f(t, pts)) ** p) ** (q / p) for t in ts])
    return float(np.sum(wt * inner) ** (1.0 / q))
