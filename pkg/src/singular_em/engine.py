"""Euler-Maruyama stepping and coupled coarse/fine strong-error estimation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, CouplingError, NumericalError
from .models import SdeModel
from .stats import mean_and_stderr
from .randomness import BrownianTable, GridSpec, coarsen, coarsen_increments, generate_increments

__all__ = [
    "Trajectory",
    "ErrorEstimate",
    "em_step",
    "simulate",
    "simulate_paths",
    "coupled_sup_error",
    "ladder_path_errors",
    "strong_error_mc",
    "batch_size_for",
    "map_path_batches",
]

# increments held in memory per batch; fixed so batching never depends on thread count
BATCH_ENTRIES = 1 << 22


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: GridSpec
    states: np.ndarray = field(repr=False)
    model_label: str = ""


@dataclass(frozen=True)
class ErrorEstimate:
    beta: float
    mean: float
    std_error: float
    n_paths: int
    delta: float
    delta_ref: float
    sup_on_grid: bool = True


def _diffuse(sig: np.ndarray, dw: np.ndarray) -> np.ndarray:
    # explicit column loop keeps the summation order fixed
    acc = sig[..., 0] * dw[..., None, 0]
    for j in range(1, sig.shape[-1]):
        acc = acc + sig[..., j] * dw[..., None, j]
    return acc


def _step(model: SdeModel, x: np.ndarray, dt: float, dw: np.ndarray) -> np.ndarray:
    return x + model.drift(x) * dt + _diffuse(model.diffusion(x), dw)


def em_step(x, model: SdeModel, dt: float, dw, step_index: int = 0) -> np.ndarray:
    """One step with drift and diffusion frozen at the left endpoint ``x``."""
    if not dt > 0:
        raise ConfigurationError("engine.em_step", f"dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    dw = np.asarray(dw, dtype=float)
    out = _step(model, x, dt, dw)
    if not np.all(np.isfinite(out)):
        raise NumericalError("engine.em_step", "non-finite state", step_index=step_index)
    return out


def simulate_paths(
    model: SdeModel,
    x0,
    increments: np.ndarray,
    dt: float,
    record_every: int = 1,
    first_path: int = 0,
) -> np.ndarray:
    """EM over a stack of increment tables.

    ``increments`` has shape (P, n, m); returns states of shape
    (P, n // record_every + 1, d) holding every ``record_every``-th node.
    """
    P, n, m = increments.shape
    d = model.dim_d
    if m != model.noise_dim_m:
        raise ConfigurationError(
            "engine.simulate", f"noise dimension {m} != model noise dimension {model.noise_dim_m}"
        )
    if n % record_every:
        raise CouplingError("engine.simulate", f"record_every={record_every} does not divide {n}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (d,):
        raise ConfigurationError("engine.simulate", f"x0 has dimension {x0.size}, model has d={d}")
    x = np.broadcast_to(x0, (P, d)).copy()
    out = np.empty((P, n // record_every + 1, d))
    out[:, 0] = x
    for k in range(n):
        x = _step(model, x, dt, increments[:, k])
        if not np.isfinite(x).all():
            bad = int(np.nonzero(~np.isfinite(x).all(axis=-1))[0][0])
            raise NumericalError(
                "engine.simulate", f"non-finite state for model {model.label}",
                path_index=first_path + bad, step_index=k,
            )
        if (k + 1) % record_every == 0:
            out[:, (k + 1) // record_every] = x
    return out


def simulate(model: SdeModel, x0, table: BrownianTable) -> Trajectory:
    if table.noise_dim != model.noise_dim_m:
        raise ConfigurationError(
            "engine.simulate", f"table noise dimension {table.noise_dim} != model m={model.noise_dim_m}"
        )
    states = simulate_paths(model, x0, table.increments[None], table.grid.dt, first_path=table.path_index)[0]
    return Trajectory(table.grid, states, model.label)


def _distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a - b
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    return np.sqrt(np.sum(diff * diff, axis=-1))


def coupled_sup_error(model: SdeModel, x0, fine_table: BrownianTable, factor: int, beta: float) -> float:
    """max over coarse nodes of |X_fine - X_coarse|, raised to ``beta``; both driven by one path."""
    if not 0 < beta < 2:
        raise ConfigurationError("engine.coupled_sup_error", f"beta must lie in (0, 2), got {beta}")
    coarse_table = coarsen(fine_table, factor)
    fine = simulate_paths(model, x0, fine_table.increments[None], fine_table.grid.dt, record_every=factor)
    coarse = simulate_paths(model, x0, coarse_table.increments[None], coarse_table.grid.dt)
    return float(np.max(_distance(fine[0], coarse[0])) ** beta)


def batch_size_for(n_steps: int, m: int) -> int:
    return max(1, BATCH_ENTRIES // (n_steps * m))


def map_path_batches(fn: Callable[[int, int], np.ndarray], n_paths: int, batch: int, threads: int = 1) -> list:
    """Apply ``fn(start, stop)`` to consecutive path ranges; results come back in path order."""
    ranges = [(s, min(s + batch, n_paths)) for s in range(0, n_paths, batch)]
    if threads <= 1 or len(ranges) <= 1:
        return [fn(s, e) for s, e in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def ladder_path_errors(
    model: SdeModel,
    x0,
    grid_fine: GridSpec,
    factors: Sequence[int],
    beta: float,
    n_paths: int,
    seed: int,
    *,
    threads: int = 1,
    coarse_models: Optional[Sequence[SdeModel]] = None,
    reference: str = "fine",
    functional: str = "sup",
) -> np.ndarray:
    """Per-path errors for several coarsening factors against one reference, shape (len(factors), n_paths).

    ``reference="fine"`` uses EM on ``grid_fine`` as the stand-in for the
    exact solution; ``reference="exact"`` uses ``model.exact_solution`` driven
    by the same Brownian path.  ``functional`` is ``"sup"`` (max over coarse
    nodes) or ``"terminal"`` (final node only).  ``coarse_models`` optionally
    replaces the model used on each coarse grid (truncated drifts).
    """
    where = "engine.ladder_path_errors"
    if not 0 < beta <= 2:
        raise ConfigurationError(where, f"beta must lie in (0, 2], got {beta}")
    if n_paths < 1:
        raise ConfigurationError(where, f"n_paths must be >= 1, got {n_paths}")
    factors = [int(f) for f in factors]
    for f in factors:
        if f < 1 or grid_fine.n_steps % f:
            raise CouplingError(where, f"factor {f} does not divide fine n_steps {grid_fine.n_steps}")
    if reference == "exact" and model.exact_solution is None:
        raise ConfigurationError(where, f"model {model.label} has no closed-form solution")
    if reference not in ("fine", "exact") or functional not in ("sup", "terminal"):
        raise ConfigurationError(where, f"bad reference/functional: {reference}/{functional}")
    coarse_models = list(coarse_models) if coarse_models is not None else [model] * len(factors)
    g = math.gcd(*factors)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    m = model.noise_dim_m
    dt = grid_fine.dt

    def run(start: int, stop: int) -> np.ndarray:
        inc = generate_increments(seed, range(start, stop), grid_fine, m)
        if reference == "fine":
            ref = simulate_paths(model, x0, inc, dt, record_every=g, first_path=start)
        else:
            w = np.zeros((stop - start, grid_fine.n_steps // g + 1, m))
            np.cumsum(coarsen_increments(inc, g), axis=1, out=w[:, 1:])
            t = np.arange(w.shape[1]) * (dt * g)
            ref = model.exact_solution(x0, t[None, :, None], w)
        out = np.empty((len(factors), stop - start))
        for i, (f, cm) in enumerate(zip(factors, coarse_models)):
            coarse = simulate_paths(cm, x0, coarsen_increments(inc, f), dt * f, first_path=start)
            ref_nodes = ref[:, :: f // g]
            if functional == "terminal":
                dist = _distance(ref_nodes[:, -1], coarse[:, -1])
            else:
                dist = np.max(_distance(ref_nodes, coarse), axis=1)
            out[i] = dist**beta
        return out

    batch = batch_size_for(grid_fine.n_steps, m)
    parts = map_path_batches(run, n_paths, batch, threads)
    return np.concatenate(parts, axis=1)


def strong_error_mc(
    model: SdeModel,
    x0,
    grid_fine: GridSpec,
    factor: int,
    beta: float,
    n_paths: int,
    seed: int,
    *,
    threads: int = 1,
) -> ErrorEstimate:
    if n_paths < 2:
        raise ConfigurationError("engine.strong_error_mc", f"n_paths must be >= 2, got {n_paths}")
    if not 0 < beta < 2:
        raise ConfigurationError("engine.strong_error_mc", f"beta must lie in (0, 2), got {beta}")
    vals = ladder_path_errors(model, x0, grid_fine, [factor], beta, n_paths, seed, threads=threads)[0]
    mean, se = mean_and_stderr(vals)
    return ErrorEstimate(beta, mean, se, n_paths, grid_fine.dt * factor, grid_fine.dt)
