"""Monte Carlo checks of the occupation-time, drift-increment and transition-density bounds.

Between grid nodes the scheme is evaluated through its continuous-time
definition: on ``[k delta, (k+1) delta)`` the state is
``X_k + b(X_k) (t - k delta) + sigma(X_k) (W_t - W_{k delta})`` with the
Brownian path resolved on a sub-grid ``substeps`` times finer than the EM
grid.  Node values are never interpolated linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import constants as C
from .engine import _diffuse, batch_size_for, map_path_batches, simulate_paths
from .errors import ConfigurationError, DomainError, UnsupportedDimensionError
from .models import ScalarField, SdeModel
from .randomness import GridSpec, coarsen_increments, generate_increments, standard_normals
from .stats import Z95, LogLogFit, fit_loglog, mean_and_stderr

__all__ = [
    "KrylovReport",
    "DensityBin",
    "DensityCheck",
    "substep_integrals",
    "krylov_functional_mc",
    "khasminskii_mc",
    "drift_increment_mc",
    "drift_increment_rate",
    "density_check",
]

DEFAULT_SUBSTEPS = 8


@dataclass(frozen=True)
class KrylovReport:
    """Monte Carlo side and bound side of an occupation-time estimate.

    For exponential-moment reports ``passed`` is ``exp_mean + exp_ci95 <=
    theoretical_exp_bound``; functional-only reports (``lam == 0``) carry NaN
    exponential fields and ``passed`` compares ``functional_mean +
    functional_ci95`` with ``onestep_bound``.
    """

    lam: float
    functional_mean: float
    functional_ci95: float
    exp_mean: float
    exp_ci95: float
    theoretical_exp_bound: object
    onestep_bound: object
    passed: bool
    log2_exp_bound: object = None
    jensen_ok: bool = True
    process: str = "em"
    n_paths: int = 0
    diagnostics: str = ""


@dataclass(frozen=True)
class DensityBin:
    center: tuple
    width: float
    count: int
    empirical_density: float
    bound_value: float
    slack_3sigma: float
    log_bound: float


@dataclass(frozen=True)
class DensityCheck:
    time_t: float
    anchor_j: int
    bins: list = field(repr=False)
    violations: int
    n_paths: int
    degenerate: bool = False


def substep_integrals(
    model: SdeModel,
    x0,
    grid: GridSpec,
    integrand: Callable,
    n_paths: int,
    seed: int,
    *,
    substeps: int = DEFAULT_SUBSTEPS,
    threads: int = 1,
) -> np.ndarray:
    """Per-path left-endpoint sums of ``integrand`` over the sub-grid, times the sub-step.

    ``integrand(t, x, x_anchor, b_anchor)`` receives the sub-grid times of
    shape (1, n), the in-step states (P, n, d), and the anchor states and
    anchor drifts (P, n, d); it returns values of shape (P, n).
    """
    if n_paths < 1:
        raise ConfigurationError("estimates.substep_integrals", f"n_paths must be >= 1, got {n_paths}")
    if substeps < 1:
        raise ConfigurationError("estimates.substep_integrals", f"substeps must be >= 1, got {substeps}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    sub_grid = grid.refined(substeps)
    n, m, dt = grid.n_steps, model.noise_dim_m, grid.dt
    h = sub_grid.dt
    t_nodes = (np.arange(n) * dt)[None, :]

    def run(start: int, stop: int) -> np.ndarray:
        inc = generate_increments(seed, range(start, stop), sub_grid, m)
        anchors = simulate_paths(model, x0, coarsen_increments(inc, substeps), dt, first_path=start)[:, :-1]
        b = model.drift(anchors)
        sig = model.diffusion(anchors)
        blocks = inc.reshape(stop - start, n, substeps, m)
        w = np.zeros((stop - start, n, m))
        total = np.zeros(stop - start)
        for j in range(substeps):
            x = anchors + b * (j * h) + _diffuse(sig, w)
            total += np.sum(integrand(t_nodes + j * h, x, anchors, b), axis=1) * h
            w = w + blocks[:, :, j, :]
        return total

    batch = batch_size_for(sub_grid.n_steps, max(m, model.dim_d))
    return np.concatenate(map_path_batches(run, n_paths, batch, threads))


def _model_constants(model: SdeModel):
    a = model.assumptions
    if not a.in_krylov_class(model.dim_d):
        from .errors import AssumptionViolation

        raise AssumptionViolation(
            "estimates.krylov", f"(p, q) = ({a.p}, {a.q}) outside the Krylov class for d = {model.dim_d}"
        )
    return C.constants_report(a, model.dim_d, model.noise_dim_m)


def _occupation(model, f: ScalarField, grid, n_paths, seed, x0, substeps, threads):
    if x0 is None:
        x0 = np.zeros(model.dim_d)

    def integrand(t, x, anchor, b):
        return np.abs(f.f(t, x))

    return substep_integrals(model, x0, grid, integrand, n_paths, seed, substeps=substeps, threads=threads)


def krylov_functional_mc(
    model: SdeModel,
    f: ScalarField,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    *,
    x0=None,
    substeps: int = DEFAULT_SUBSTEPS,
    threads: int = 1,
) -> KrylovReport:
    """E int_0^T |f(t, X_t)| dt against the one-step bound alpha0 ||f|| T^(1/gamma0)."""
    consts = _model_constants(model)
    vals = _occupation(model, f, grid, n_paths, seed, x0, substeps, threads)
    mean, se = mean_and_stderr(vals)
    onestep = C.onestep_krylov_bound(f.lpq_norm, consts.alpha0, consts.gamma0, grid.horizon_T)
    ci = Z95 * se
    return KrylovReport(
        lam=0.0, functional_mean=mean, functional_ci95=ci, exp_mean=math.nan, exp_ci95=math.nan,
        theoretical_exp_bound=math.nan, onestep_bound=onestep, passed=bool(mean + ci <= onestep),
        n_paths=n_paths,
    )


def khasminskii_mc(
    model: SdeModel,
    f: ScalarField,
    lam: float,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    *,
    x0=None,
    substeps: int = DEFAULT_SUBSTEPS,
    process: str = "em",
    proxy_refinement: int = 8,
    threads: int = 1,
) -> KrylovReport:
    """E exp(lam int_0^T |f(t, X_t)| dt) against 2^(1 + T (2 lam alpha0 ||f||)^gamma0).

    ``process="exact-proxy"`` runs the scheme on a grid ``proxy_refinement``
    times finer as a stand-in for the exact diffusion and checks the
    solution-process bound (``hat_alpha0`` in place of ``alpha0``).
    """
    if not lam > 0:
        raise DomainError("estimates.khasminskii_mc", f"lambda must be > 0, got {lam}")
    if process not in ("em", "exact-proxy"):
        raise ConfigurationError("estimates.khasminskii_mc", f"unknown process {process!r}")
    consts = _model_constants(model)
    if process == "exact-proxy":
        grid = grid.refined(proxy_refinement)
        a = consts.hat_alpha0
    else:
        a = consts.alpha0
    vals = _occupation(model, f, grid, n_paths, seed, x0, substeps, threads)
    fmean, fse = mean_and_stderr(vals)
    with np.errstate(over="ignore"):
        ev = np.exp(lam * vals)
    log2_bound = C.khasminskii_log2_bound(lam, f.lpq_norm, a, consts.gamma0, grid.horizon_T)
    bound = C.khasminskii_bound(lam, f.lpq_norm, a, consts.gamma0, grid.horizon_T)
    onestep = C.onestep_krylov_bound(f.lpq_norm, a, consts.gamma0, grid.horizon_T)
    if not np.all(np.isfinite(ev)):
        bad = int(np.nonzero(~np.isfinite(ev))[0][0])
        return KrylovReport(
            lam, fmean, Z95 * fse, math.inf, math.inf, bound, onestep, False, log2_bound,
            process=process, n_paths=n_paths, diagnostics=f"exponential overflow on path {bad}",
        )
    emean, ese = mean_and_stderr(ev)
    eci = Z95 * ese
    passed = bool(C.mp.log(C.mp.mpf(emean + eci), 2) <= log2_bound)
    # convexity: E exp(lam F) >= exp(lam E F); slack from both confidence intervals
    jensen_ok = bool(emean + eci >= math.exp(lam * (fmean - Z95 * fse)))
    return KrylovReport(
        lam, fmean, Z95 * fse, emean, eci, bound, onestep, passed, log2_bound,
        jensen_ok=jensen_ok, process=process, n_paths=n_paths,
    )


def drift_increment_mc(
    model: SdeModel,
    grid: GridSpec,
    n_paths: int,
    seed: int,
    *,
    x0=None,
    substeps: int = DEFAULT_SUBSTEPS,
    threads: int = 1,
) -> tuple[float, float]:
    """(mean, 95% CI half-width) of int_0^T |b(X_t) - b(X_{t_delta})|^2 dt."""
    vals = _drift_increment_values(model, grid, n_paths, seed, x0, substeps, threads)
    mean, se = mean_and_stderr(vals)
    return mean, Z95 * se


def _drift_increment_values(model, grid, n_paths, seed, x0, substeps, threads):
    if x0 is None:
        x0 = np.zeros(model.dim_d)

    def integrand(t, x, anchor, b):
        diff = model.drift(x) - b
        return np.sum(diff * diff, axis=-1)

    return substep_integrals(model, x0, grid, integrand, n_paths, seed, substeps=substeps, threads=threads)


@dataclass(frozen=True)
class DriftIncrementStudy:
    deltas: tuple
    means: tuple
    ci95: tuple
    fit: LogLogFit
    predicted_exponent: float


def drift_increment_rate(
    model: SdeModel,
    deltas,
    n_paths: int,
    seed: int,
    *,
    T: float = 1.0,
    x0=None,
    substeps: int = DEFAULT_SUBSTEPS,
    threads: int = 1,
) -> DriftIncrementStudy:
    """Fit the delta-exponent of the drift-increment functional over a step-size ladder."""
    means, cis, ses = [], [], []
    for delta in deltas:
        n = int(round(T / delta))
        vals = _drift_increment_values(model, GridSpec(T, n), n_paths, seed, x0, substeps, threads)
        mean, se = mean_and_stderr(vals)
        means.append(mean)
        ses.append(se)
        cis.append(Z95 * se)
    fit = fit_loglog(deltas, means, ses)
    return DriftIncrementStudy(
        tuple(deltas), tuple(means), tuple(cis), fit, min(1.0, model.assumptions.alpha / 2.0)
    )


def density_check(
    model: SdeModel,
    grid: GridSpec,
    anchor_j: int,
    t: float,
    n_paths: int,
    n_bins: int,
    seed: int,
    *,
    x=None,
    half_width: Optional[float] = None,
) -> DensityCheck:
    """Histogram of X_t started from ``x`` at time ``anchor_j * delta`` against the Gaussian envelope.

    The envelope is Lambda3 exp(-|y - x|^2 / (kappa0 tau)) / (2 pi lambda_lower tau)^(d/2)
    with ``tau = t - anchor_j * delta``.  For d = 2, ``n_bins`` is per axis.
    A bin violates the envelope when ``density - 3 * slack > bound`` with
    ``slack = sqrt(p (1 - p) / n_paths) / volume``.
    """
    where = "estimates.density_check"
    d = model.dim_d
    if d > 2:
        raise UnsupportedDimensionError(where, f"histograms need d <= 2, got d = {d}")
    delta = grid.dt
    tau = t - anchor_j * delta
    if not tau > 0:
        raise DomainError(where, f"t = {t} must exceed anchor time {anchor_j * delta}")
    if n_bins < 1:
        raise ConfigurationError(where, f"n_bins must be >= 1, got {n_bins}")
    x = np.zeros(d) if x is None else np.asarray(x, dtype=float).reshape(d)
    if n_paths == 0:
        return DensityCheck(t, anchor_j, [], 0, 0, degenerate=True)
    consts = C.constants_report(model.assumptions, d, model.noise_dim_m)
    a = model.assumptions
    n_full = int(math.floor(t / delta + 1e-9)) - anchor_j
    rem = t - (anchor_j + n_full) * delta
    if rem < 1e-9 * delta:
        rem = 0.0
    n_total = n_full + (1 if rem > 0 else 0)
    m = model.noise_dim_m
    scale = np.full(n_total, math.sqrt(delta))
    if rem > 0:
        scale[-1] = math.sqrt(rem)
    samples = np.empty((n_paths, d))
    batch = max(1, (1 << 22) // max(1, n_total * m))
    for start in range(0, n_paths, batch):
        stop = min(start + batch, n_paths)
        z = np.stack([standard_normals(seed, k, n_total, m) for k in range(start, stop)])
        inc = z * scale[None, :, None]
        xs = np.broadcast_to(x, (stop - start, d)).copy()
        for k in range(n_total):
            step = delta if k < n_full else rem
            xs = xs + model.drift(xs) * step + _diffuse(model.diffusion(xs), inc[:, k])
        samples[start:stop] = xs

    hw = half_width if half_width is not None else (a.b_sup * tau + 6.0 * math.sqrt(a.lambda_upper * tau))
    edges = [np.linspace(x[i] - hw, x[i] + hw, n_bins + 1) for i in range(d)]
    counts, _ = np.histogramdd(samples, bins=edges)
    width = edges[0][1] - edges[0][0]
    vol = width**d
    log_l3 = float(C.mp.log(consts.lambda3))
    kappa0 = float(consts.kappa0)
    norm_log = -0.5 * d * math.log(2 * math.pi * a.lambda_lower * tau)
    centers = [0.5 * (e[1:] + e[:-1]) for e in edges]
    bins, violations = [], 0
    for idx in np.ndindex(*counts.shape):
        c = np.array([centers[i][idx[i]] for i in range(d)])
        count = int(counts[idx])
        phat = count / n_paths
        dens = phat / vol
        slack = 3.0 * math.sqrt(phat * (1.0 - phat) / n_paths) / vol
        log_bound = log_l3 - float(np.sum((c - x) ** 2)) / (kappa0 * tau) + norm_log
        excess = dens - slack
        if excess > 0 and math.log(excess) > log_bound:
            violations += 1
        bound = math.exp(log_bound) if log_bound < 700 else math.inf
        bins.append(DensityBin(tuple(c.tolist()), float(width), count, float(dens), bound, float(slack), log_bound))
    return DensityCheck(t, anchor_j, bins, violations, n_paths)
