"""Keyed Brownian increments with exact coarse/fine coupling.

Each entry ``(step, coord)`` of path ``path_index`` is a pure function of
``(seed, path_index, step, coord)``: the Philox4x64 counter-mode generator is
keyed with ``(seed, path_index)`` and entry ``i = step * m + coord`` is raw
output ``i`` of that stream (counter block ``i // 4``, lane ``i % 4``).
Uniforms are mapped to normals by the inverse CDF.

Scaled increments are rounded to the dyadic lattice ``2**-LATTICE_BITS``.
Sums of lattice values are exact in binary64 (while ``|sum| < 2**12``), so a
coarse increment equals its fine block sum irrespective of association, and
additive-noise schemes give bit-identical states on nested grids.  The
rounding perturbs each increment by at most ``2**-41``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError, CouplingError

__all__ = [
    "LATTICE_BITS",
    "GridSpec",
    "BrownianTable",
    "standard_normals",
    "normal_entry",
    "generate_table",
    "generate_increments",
    "coarsen",
    "coarsen_increments",
]

LATTICE_BITS = 40
_LATTICE_SCALE = float(2**LATTICE_BITS)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class GridSpec:
    horizon_T: float
    n_steps: int

    def __post_init__(self):
        T = self.horizon_T
        if not (isinstance(T, (int, float, np.floating)) and math.isfinite(T) and T > 0):
            raise ConfigurationError("randomness.GridSpec", f"horizon_T must be finite and > 0, got {T!r}")
        n = self.n_steps
        if isinstance(n, (bool, np.bool_)) or not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigurationError("randomness.GridSpec", f"n_steps must be a positive integer, got {n!r}")
        object.__setattr__(self, "horizon_T", float(T))
        object.__setattr__(self, "n_steps", int(n))

    @property
    def dt(self) -> float:
        return self.horizon_T / self.n_steps

    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.horizon_T
        return t

    def coarsened(self, factor: int) -> "GridSpec":
        _check_factor(self.n_steps, factor, "randomness.GridSpec.coarsened")
        return GridSpec(self.horizon_T, self.n_steps // factor)

    def refined(self, factor: int) -> "GridSpec":
        return GridSpec(self.horizon_T, self.n_steps * int(factor))


@dataclass(frozen=True, eq=False)
class BrownianTable:
    grid: GridSpec
    noise_dim: int
    increments: np.ndarray = field(repr=False)
    seed: int
    path_index: int

    def __post_init__(self):
        inc = np.array(self.increments, dtype=np.float64)
        if inc.shape != (self.grid.n_steps, self.noise_dim):
            raise ConfigurationError(
                "randomness.BrownianTable",
                f"increments shape {inc.shape} != ({self.grid.n_steps}, {self.noise_dim})",
            )
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    def brownian_path(self) -> np.ndarray:
        """W on the grid nodes, shape (n_steps + 1, m), W_0 = 0."""
        out = np.zeros((self.grid.n_steps + 1, self.noise_dim))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def _check_seed(seed, path_index, where):
    for name, v in (("seed", seed), ("path_index", path_index)):
        if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, np.integer)):
            raise ConfigurationError(where, f"{name} must be an integer, got {v!r}")
        if not 0 <= int(v) <= _MASK64:
            raise ConfigurationError(where, f"{name} must lie in [0, 2**64), got {v}")


def _philox(seed: int, path_index: int, block: int = 0) -> np.random.Philox:
    key = np.array([int(seed), int(path_index)], dtype=np.uint64)
    return np.random.Philox(key=key, counter=[block, 0, 0, 0])


def _raw_to_normal(raw: np.ndarray) -> np.ndarray:
    # 53-bit midpoint uniforms lie strictly inside (0, 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def standard_normals(seed: int, path_index: int, n_steps: int, m: int) -> np.ndarray:
    """Standard normal draws for one path, shape (n_steps, m)."""
    _check_seed(seed, path_index, "randomness.standard_normals")
    raw = _philox(seed, path_index).random_raw(n_steps * m)
    return _raw_to_normal(raw).reshape(n_steps, m)


def normal_entry(seed: int, path_index: int, step: int, coord: int, m: int) -> float:
    """Entry (step, coord) of :func:`standard_normals` without generating predecessors."""
    _check_seed(seed, path_index, "randomness.normal_entry")
    i = step * m + coord
    raw = _philox(seed, path_index, block=i // 4).random_raw(4)
    return float(_raw_to_normal(raw[i % 4 : i % 4 + 1])[0])


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.rint(x * _LATTICE_SCALE) / _LATTICE_SCALE


def generate_table(seed: int, path_index: int, grid: GridSpec, m: int) -> BrownianTable:
    if not isinstance(grid, GridSpec):
        raise ConfigurationError("randomness.generate_table", "grid must be a GridSpec")
    if m < 1:
        raise ConfigurationError("randomness.generate_table", f"noise dimension must be >= 1, got {m}")
    z = standard_normals(seed, path_index, grid.n_steps, m)
    inc = _quantize(z * math.sqrt(grid.dt))
    return BrownianTable(grid, int(m), inc, int(seed), int(path_index))


def generate_increments(seed: int, path_indices, grid: GridSpec, m: int) -> np.ndarray:
    """Stacked increments for several paths, shape (len(path_indices), n_steps, m).

    Row ``r`` equals ``generate_table(seed, path_indices[r], grid, m).increments``.
    """
    paths = list(path_indices)
    out = np.empty((len(paths), grid.n_steps, m))
    scale = math.sqrt(grid.dt)
    for r, k in enumerate(paths):
        out[r] = standard_normals(seed, k, grid.n_steps, m)
    out *= scale
    return _quantize(out)


def _check_factor(n_steps: int, factor, where: str):
    if isinstance(factor, (bool, np.bool_)) or not isinstance(factor, (int, np.integer)) or factor < 1:
        raise CouplingError(where, f"factor must be a positive integer, got {factor!r}")
    if n_steps % factor:
        raise CouplingError(where, f"factor {factor} does not divide n_steps {n_steps}")


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Block sums along the step axis (axis -2), accumulated in ascending step order."""
    n = increments.shape[-2]
    _check_factor(n, factor, "randomness.coarsen")
    if factor == 1:
        return increments.copy()
    shape = increments.shape[:-2] + (n // factor, factor, increments.shape[-1])
    blocks = increments.reshape(shape)
    acc = blocks[..., 0, :].copy()
    for j in range(1, factor):
        acc += blocks[..., j, :]
    return acc


def coarsen(table: BrownianTable, factor: int) -> BrownianTable:
    _check_factor(table.grid.n_steps, factor, "randomness.coarsen")
    return BrownianTable(
        table.grid.coarsened(factor),
        table.noise_dim,
        coarsen_increments(table.increments, factor),
        table.seed,
        table.path_index,
    )
