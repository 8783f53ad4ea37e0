"""Gaussian-smoothed moduli of the drift, exponent fits and a Gagliardo seminorm.

After the substitution ``x = sqrt(s) u`` the smoothed modulus

    s^(-d/2) int |b(x + y) - b(x + z)|^2 exp(-|x|^2 / s) dx

becomes ``int |b(sqrt(s) u + y) - b(sqrt(s) u + z)|^2 exp(-|u|^2) du`` with no
prefactor, and the weight is integrated by Gauss-Hermite nodes.  When the
drift exposes jump coordinates the real line is instead cut at every jump and
each piece of ``[-U, U]`` gets its own Gauss-Legendre rule, which restores
spectral convergence across discontinuities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError, UnsupportedDimensionError
from .models import SdeModel

__all__ = [
    "ModulusSample",
    "AlphaFit",
    "a2_modulus",
    "fit_alpha",
    "gb_modulus",
    "gb_probed_sup",
    "gagliardo_seminorm",
]

# exp(-U^2) is below 1e-35 outside [-U, U]
U_MAX = 9.0
GH_NODES_1D = 128
GH_NODES_2D = 64
PIECE_NODES = 48

DriftLike = Union[SdeModel, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class ModulusSample:
    s: float
    y: tuple
    z: tuple
    value: float
    quadrature_error_estimate: float


@dataclass(frozen=True)
class AlphaFit:
    """Exponent of the smoothed modulus in |y - z|.

    ``alpha_hat`` is NaN and ``degenerate`` is set when every modulus
    vanishes (constant drift).
    """

    alpha_hat: float
    log_intercepts_by_s: list
    r_squared: float
    offsets_used: list
    slopes_by_s: list
    degenerate: bool = False


def _resolve(b: DriftLike, breakpoints):
    if isinstance(b, SdeModel):
        return b.drift, (breakpoints if breakpoints is not None else b.breakpoints)
    return b, breakpoints


def _as_point(v, d: int, where: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 1 and d > 1:
        v = np.full(d, float(v[0]))
    if v.shape != (d,):
        raise ConfigurationError(where, f"point {v.tolist()} has the wrong dimension for d = {d}")
    return v


def _gh(n: int):
    u, w = np.polynomial.hermite.hermgauss(n)
    return u, w


def _pieces(cuts, n: int, lo: float = -U_MAX, hi: float = U_MAX):
    """Gauss-Legendre nodes on [lo, hi] split at ``cuts``; weights include exp(-u^2)."""
    edges = np.unique(np.concatenate([[lo, hi], np.clip(np.asarray(cuts, dtype=float), lo, hi)]))
    x, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for a, c in zip(edges[:-1], edges[1:]):
        if c - a <= 0:
            continue
        u = 0.5 * (c - a) * x + 0.5 * (c + a)
        nodes.append(u)
        weights.append(0.5 * (c - a) * w * np.exp(-u * u))
    return np.concatenate(nodes), np.concatenate(weights)


def _axis_rules(d, s, shifts, breakpoints, n_gh, n_piece):
    """Per-axis (nodes, weights) for the variable u in b(sqrt(s) u + shift)."""
    rs = math.sqrt(s)
    rules = []
    for i in range(d):
        bp = breakpoints[i] if breakpoints is not None and i < len(breakpoints) else None
        if bp:
            cuts = [(a - sh[i]) / rs for a in bp for sh in shifts]
            rules.append(_pieces(cuts, n_piece))
        else:
            rules.append(_gh(n_gh))
    return rules


def _tensor(rules):
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack(grids, axis=-1).reshape(-1, len(rules))
    w = np.ones(1)
    for r in rules:
        w = np.multiply.outer(w, r[1]).ravel()
    return pts, w


def _sqdiff(b, p, q) -> np.ndarray:
    diff = np.asarray(b(p), dtype=float) - np.asarray(b(q), dtype=float)
    diff = diff.reshape(diff.shape[0], -1)
    return np.sum(diff * diff, axis=-1)


def _a2_value(b, d, s, y, z, breakpoints, n_gh, n_piece):
    pts, w = _tensor(_axis_rules(d, s, (y, z), breakpoints, n_gh, n_piece))
    x = math.sqrt(s) * pts
    return float(np.sum(w * _sqdiff(b, x + y, x + z)))


def a2_modulus(
    b: DriftLike,
    d: int,
    s: float,
    y,
    z,
    *,
    breakpoints: Optional[Sequence] = None,
    n_nodes: Optional[int] = None,
) -> ModulusSample:
    """Smoothed L^2 modulus at scale ``s`` between shifts ``y`` and ``z``.

    The error estimate is the change under doubling of the node count.
    """
    where = "regularity.a2_modulus"
    if not s > 0:
        raise DomainError(where, f"s must be > 0, got {s}")
    if d not in (1, 2):
        raise UnsupportedDimensionError(where, f"tensor quadrature implemented for d <= 2, got d = {d}")
    fn, bp = _resolve(b, breakpoints)
    y = _as_point(y, d, where)
    z = _as_point(z, d, where)
    n_gh = n_nodes or (GH_NODES_1D if d == 1 else GH_NODES_2D)
    n_piece = n_nodes or PIECE_NODES
    if np.array_equal(y, z):
        return ModulusSample(float(s), tuple(y), tuple(z), 0.0, 0.0)
    v = _a2_value(fn, d, s, y, z, bp, n_gh, n_piece)
    v2 = _a2_value(fn, d, s, y, z, bp, 2 * n_gh, 2 * n_piece)
    return ModulusSample(float(s), tuple(y.tolist()), tuple(z.tolist()), max(v2, 0.0), abs(v2 - v))


def fit_alpha(
    b: DriftLike,
    d: int,
    s_list: Sequence[float],
    offset_list: Sequence[float],
    direction=None,
    *,
    base=None,
    breakpoints: Optional[Sequence] = None,
) -> AlphaFit:
    """Slope of log modulus against log |y - z| with z = ``base`` and y = base + h * direction."""
    where = "regularity.fit_alpha"
    offsets = np.asarray(sorted(float(h) for h in offset_list))
    if offsets.size < 3 or np.any(offsets <= 0) or offsets[-1] / offsets[0] < 10.0:
        raise ConfigurationError(where, "need at least 3 positive offsets spanning one decade")
    if not len(s_list):
        raise ConfigurationError(where, "s_list is empty")
    direction = np.ones(d) if direction is None else np.asarray(direction, dtype=float).reshape(d)
    direction = direction / np.linalg.norm(direction)
    base = np.zeros(d) if base is None else _as_point(base, d, where)

    slopes, intercepts, xs_c, ys_c = [], [], [], []
    used = set()
    for s in s_list:
        vals = np.array(
            [a2_modulus(b, d, s, base + h * direction, base, breakpoints=breakpoints).value for h in offsets]
        )
        keep = vals > 0
        if keep.sum() < 2:
            continue
        lx, ly = np.log(offsets[keep]), np.log(vals[keep])
        slope, icpt = np.polyfit(lx, ly, 1)
        slopes.append(float(slope))
        intercepts.append(float(icpt))
        xs_c.append(lx - lx.mean())
        ys_c.append(ly - ly.mean())
        used.update(offsets[keep].tolist())
    if not slopes:
        return AlphaFit(math.nan, [], math.nan, [], [], degenerate=True)
    # common slope with per-s intercepts
    xc, yc = np.concatenate(xs_c), np.concatenate(ys_c)
    pooled = float(np.dot(xc, yc) / np.dot(xc, xc))
    ss_tot = float(np.dot(yc, yc))
    ss_res = float(np.sum((yc - pooled * xc) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return AlphaFit(float(np.mean(slopes)), intercepts, r2, sorted(used), slopes)


def _pieces_batch(cuts: np.ndarray, n: int, lo: float = -U_MAX, hi: float = U_MAX):
    """Row-wise version of ``_pieces`` with a fixed piece count; empty pieces get zero weight."""
    rows = cuts.shape[0]
    edges = np.sort(np.concatenate([np.full((rows, 1), lo), np.clip(cuts, lo, hi), np.full((rows, 1), hi)], axis=1))
    a, c = edges[:, :-1, None], edges[:, 1:, None]
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (c - a) * x + 0.5 * (c + a)
    weights = 0.5 * (c - a) * w * np.exp(-u * u)
    return u.reshape(rows, -1), weights.reshape(rows, -1)


def _gb_value_split(b, r, s, z, bp, n_piece):
    rs, rr = math.sqrt(s), math.sqrt(r)
    jumps = np.asarray(bp, dtype=float)
    # the inner integral is smooth in v away from v = 0 and from gaps between jumps
    gaps = (jumps[:, None] - jumps[None, :]).ravel()
    v, wv = _pieces(np.concatenate([[0.0], gaps / rr]), n_piece)
    cuts = np.concatenate(
        [np.broadcast_to((jumps - z) / rs, (v.size, jumps.size)), (jumps[None, :] - z - rr * v[:, None]) / rs], axis=1
    )
    u, wu = _pieces_batch(cuts, n_piece)
    x = (z + rs * u)[..., None]
    diff = np.asarray(b(x), dtype=float) - np.asarray(b(x + rr * v[:, None, None]), dtype=float)
    inner = np.sum(wu * np.sum(diff * diff, axis=-1), axis=1)
    return float(np.sum(wv * inner))


def _gb_value_gh(b, d, r, s, z, n):
    pts, w = _tensor([_gh(n)] * (2 * d))
    u, v = pts[:, :d], pts[:, d:]
    x = z + math.sqrt(s) * u
    return float(np.sum(w * _sqdiff(b, x, x + math.sqrt(r) * v)))


def gb_modulus(
    b: DriftLike,
    d: int,
    r: float,
    s: float,
    z,
    *,
    breakpoints: Optional[Sequence] = None,
    n_nodes: Optional[int] = None,
) -> float:
    """(rs)^(-d/2) int int |b(x) - b(y)|^2 exp(-|x - z|^2 / s) exp(-|y - x|^2 / r) dy dx at one z.

    With x = z + sqrt(s) u and y = x + sqrt(r) v this is a Gauss-weighted
    integral in (u, v).  For d = 1 drifts with jumps both integrals are split;
    otherwise a tensor Gauss-Hermite rule is used.
    """
    where = "regularity.gb_modulus"
    if not (r > 0 and s > 0):
        raise DomainError(where, f"r and s must be > 0, got r = {r}, s = {s}")
    if d not in (1, 2):
        raise UnsupportedDimensionError(where, f"tensor quadrature implemented for d <= 2, got d = {d}")
    fn, bp = _resolve(b, breakpoints)
    z = _as_point(z, d, where)
    if d == 1 and bp and bp[0]:
        return _gb_value_split(fn, r, s, float(z[0]), bp[0], n_nodes or PIECE_NODES)
    return _gb_value_gh(fn, d, r, s, z, n_nodes or (GH_NODES_1D if d == 1 else 24))


def gb_probed_sup(
    b: DriftLike,
    d: int,
    r: float,
    s: float,
    center,
    spread: float,
    *,
    n_points: int = 11,
    breakpoints: Optional[Sequence] = None,
) -> tuple[float, np.ndarray]:
    """Largest ``gb_modulus`` over ``n_points`` z values on center +- spread along the diagonal.

    A probed maximum, not a proven supremum.
    """
    d_center = _as_point(center, d, "regularity.gb_probed_sup")
    offsets = np.linspace(-spread, spread, n_points)
    diag = np.ones(d) / math.sqrt(d)
    vals = [gb_modulus(b, d, r, s, d_center + t * diag, breakpoints=breakpoints) for t in offsets]
    k = int(np.argmax(vals))
    return float(vals[k]), d_center + offsets[k] * diag


def gagliardo_seminorm(
    b: DriftLike,
    d: int,
    p_exp: float,
    theta: float,
    box: Sequence[tuple],
    grid: int,
) -> float:
    """Midpoint-rule (int int |b(x) - b(y)|^p / |x - y|^(d + p theta) dx dy)^(1/p) over ``box``.

    Pairs closer than one cell width (box width / grid) are dropped.
    """
    where = "regularity.gagliardo_seminorm"
    if not 0 < theta < 1:
        raise DomainError(where, f"theta must lie in (0, 1), got {theta}")
    if not p_exp >= 2:
        raise DomainError(where, f"p must be >= 2, got {p_exp}")
    if len(box) != d or any(not hi > lo for lo, hi in box):
        raise ConfigurationError(where, f"degenerate box {list(box)} for d = {d}")
    if grid < 2:
        raise ConfigurationError(where, f"grid must be >= 2, got {grid}")
    fn, _ = _resolve(b, None)
    axes = [lo + (np.arange(grid) + 0.5) * (hi - lo) / grid for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vol = float(np.prod([(hi - lo) / grid for lo, hi in box]))
    h_min = max(hi - lo for lo, hi in box) / grid
    vals = np.asarray(fn(pts), dtype=float).reshape(pts.shape[0], -1)
    total = 0.0
    # row blocks bound memory; accumulation order is fixed
    block = max(1, (1 << 22) // pts.shape[0])
    for start in range(0, pts.shape[0], block):
        stop = min(start + block, pts.shape[0])
        dist = np.sqrt(np.sum((pts[start:stop, None, :] - pts[None, :, :]) ** 2, axis=-1))
        num = np.sum(np.abs(vals[start:stop, None, :] - vals[None, :, :]) ** 2, axis=-1) ** (p_exp / 2)
        mask = dist >= h_min * (1 - 1e-12)
        with np.errstate(divide="ignore"):
            total += float(np.sum(np.where(mask, num / np.where(mask, dist, 1.0) ** (d + p_exp * theta), 0.0)))
    return (total * vol * vol) ** (1.0 / p_exp)
