"""Convergence studies over step-size ladders, rate fits, and config/CSV I/O."""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import constants as C
from .engine import ladder_path_errors
from .errors import AssumptionViolation, ConfigurationError
from .models import SdeModel, check_assumptions, get_model, truncate_drift
from .randomness import GridSpec
from .stats import fit_loglog, mean_and_stderr

__all__ = [
    "DEFAULT_LADDER",
    "StudyConfig",
    "RateFit",
    "RateReport",
    "run_convergence",
    "rate_report",
    "decreasing_within",
    "load_config",
    "parse_config",
    "parse_config_values",
    "build_config",
    "config_overrides",
    "write_config",
    "format_config",
    "write_csv",
    "read_csv",
    "atomic_write_text",
]

DEFAULT_LADDER = tuple(2.0**-j for j in range(4, 9))
DEFAULT_MARGIN = 0.05
TRUNCATION_MODES = ("none", "derived", "fixed")
CSV_HEADER = "delta,error_mean,error_stderr,n_paths,beta,theoretical_rate"


def _power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class StudyConfig:
    """Inputs of one convergence study.

    ``x0 = None`` starts at the origin, or at ones for oracle-only models
    (whose closed forms are trivial at zero).  ``truncation_mode`` is
    ``"none"``, ``"derived"`` (cutoff radius from ``constants.truncation_level``
    per step size) or ``"fixed"`` (radius ``truncation_k``).
    """

    model_label: str = "indicator-1d"
    x0: Optional[tuple] = None
    T: float = 1.0
    delta_ladder: tuple = DEFAULT_LADDER
    ref_refinement: int = 16
    beta: float = 1.0
    n_paths: int = 10_000
    seed: int = 0
    truncation_mode: str = "none"
    truncation_k: Optional[float] = None

    def __post_init__(self):
        where = "harness.StudyConfig"
        object.__setattr__(self, "delta_ladder", tuple(float(v) for v in self.delta_ladder))
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError(where, f"T must be positive and finite, got {self.T}")
        if not self.delta_ladder:
            raise ConfigurationError(where, "delta ladder is empty")
        for a, b in zip(self.delta_ladder, self.delta_ladder[1:]):
            if not b < a:
                raise ConfigurationError(where, f"delta ladder must be strictly decreasing, got {a} then {b}")
        for delta in self.delta_ladder:
            n = self.T / delta
            k = int(round(n))
            if not (abs(n - k) <= 1e-9 * max(1.0, n) and _power_of_two(k)):
                raise ConfigurationError(
                    where,
                    f"delta {delta!r} gives T/delta = {n!r}, not a power of two; every ladder grid "
                    "must divide the reference grid, so each delta must equal T/2^j",
                )
        if not (isinstance(self.ref_refinement, (int, np.integer)) and self.ref_refinement >= 2):
            raise ConfigurationError(where, f"ref_refinement must be an integer >= 2, got {self.ref_refinement}")
        if not _power_of_two(int(self.ref_refinement)):
            raise ConfigurationError(where, f"ref_refinement must be a power of two, got {self.ref_refinement}")
        if not 0 < self.beta < 2:
            raise ConfigurationError(where, f"beta must lie in (0, 2), got {self.beta}")
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 2):
            raise ConfigurationError(where, f"n_paths must be an integer >= 2, got {self.n_paths}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ConfigurationError(where, f"seed must be a nonnegative integer, got {self.seed}")
        if self.truncation_mode not in TRUNCATION_MODES:
            raise ConfigurationError(where, f"truncation_mode must be one of {TRUNCATION_MODES}")
        if self.truncation_mode == "fixed" and not (self.truncation_k is not None and self.truncation_k > 0):
            raise ConfigurationError(where, "truncation_mode=fixed needs truncation_k > 0")

    @property
    def use_derived_k(self) -> bool:
        return self.truncation_mode == "derived"

    def reference_grid(self) -> GridSpec:
        return GridSpec(self.T, int(round(self.T / min(self.delta_ladder))) * int(self.ref_refinement))


@dataclass(frozen=True)
class RateFit:
    """Ladder errors and the least-squares slope of log error on log delta.

    ``degenerate`` marks ladders with a zero mean error (an exact scheme);
    slope and intercept are then NaN.
    """

    points: tuple
    slope: float
    intercept: float
    r_squared: float
    theoretical_rate: float
    slope_stderr: float = math.nan
    beta: float = 1.0
    n_paths: int = 0
    model_label: str = ""
    degenerate: bool = False
    truncation_levels: Optional[tuple] = None
    path_errors: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def means(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


def _start_point(model: SdeModel, x0) -> np.ndarray:
    if x0 is not None:
        x = np.asarray(x0, dtype=float).reshape(-1)
        if x.size == 1 and model.dim_d > 1:
            x = np.full(model.dim_d, x[0])
        if x.shape != (model.dim_d,):
            raise ConfigurationError("harness.run_convergence", f"x0 has dimension {x.size}, model has d={model.dim_d}")
        return x
    return np.ones(model.dim_d) if model.oracle_only else np.zeros(model.dim_d)


def truncation_levels(config: StudyConfig, model: SdeModel) -> Optional[tuple]:
    if config.truncation_mode == "none":
        return None
    if config.truncation_mode == "fixed":
        return tuple(float(config.truncation_k) for _ in config.delta_ladder)
    a = model.assumptions
    # the moment exponent of the error plays the role of q in the cutoff radius
    return tuple(
        C.truncation_level(config.beta, model.dim_d, a.lambda_upper, config.T, a.alpha, delta)
        for delta in config.delta_ladder
    )


def run_convergence(
    config: StudyConfig,
    *,
    threads: int = 1,
    model: Optional[SdeModel] = None,
    keep_path_errors: bool = False,
) -> RateFit:
    """Coupled strong errors over the ladder against one shared reference per path.

    Models with a closed-form solution that are flagged oracle-only are
    compared at the terminal time with the exact solution; all others use the
    sup over coarse nodes against EM on the reference grid.
    """
    model = model if model is not None else get_model(config.model_label)
    if not model.oracle_only:
        try:
            check_assumptions(model)
        except AssumptionViolation as exc:
            raise AssumptionViolation("harness.run_convergence", exc.message) from exc
    x0 = _start_point(model, config.x0)
    grid_ref = config.reference_grid()
    factors = [int(round(delta / grid_ref.dt)) for delta in config.delta_ladder]
    ks = truncation_levels(config, model)
    coarse = [truncate_drift(model, k) for k in ks] if ks is not None else None
    exact = model.oracle_only and model.exact_solution is not None
    errs = ladder_path_errors(
        model, x0, grid_ref, factors, config.beta, config.n_paths, config.seed,
        threads=threads, coarse_models=coarse,
        reference="exact" if exact else "fine", functional="terminal" if exact else "sup",
    )
    stats = [mean_and_stderr(row) for row in errs]
    points = tuple((float(d), m, s) for d, (m, s) in zip(config.delta_ladder, stats))
    rate = config.beta / 2.0 * min(1.0, model.assumptions.alpha / 2.0)
    common = dict(
        theoretical_rate=rate, beta=config.beta, n_paths=config.n_paths, model_label=model.label,
        truncation_levels=ks, path_errors=errs if keep_path_errors else None,
    )
    means = np.array([p[1] for p in points])
    if len(points) < 2 or np.any(means <= 0):
        return RateFit(points, math.nan, math.nan, math.nan, degenerate=True, **common)
    fit = fit_loglog(config.delta_ladder, means, [p[2] for p in points])
    return RateFit(points, fit.slope, fit.intercept, fit.r_squared, slope_stderr=fit.slope_stderr, **common)


def decreasing_within(fit: RateFit, n_sigma: float = 2.0) -> tuple[bool, list]:
    """Errors along the (decreasing) ladder must not increase by more than n_sigma combined standard errors."""
    bad = []
    for i in range(len(fit.points) - 1):
        (_, m0, s0), (d1, m1, s1) = fit.points[i], fit.points[i + 1]
        if not m1 < m0 + n_sigma * math.hypot(s0, s1):
            bad.append(d1)
    return not bad, bad


@dataclass(frozen=True)
class RateReport:
    """Fitted slope against the theoretical rate, with the log-delta prefactor on the ladder.

    The prefactor uses the placeholder C2 = 1 and is context only; it never
    enters ``passed``.
    """

    applicable: bool
    slope: float
    theoretical_rate: float
    margin: float
    passed: bool
    decreasing: bool
    diagnostics: str
    s4_prefactors: tuple = ()
    s4_products_decreasing: Optional[bool] = None
    fit: Optional[RateFit] = field(default=None, repr=False)

    def as_text(self) -> str:
        if not self.applicable:
            return f"rate check not applicable: {self.diagnostics}"
        lines = [
            f"slope = {self.slope:.4f}  theoretical rate = {self.theoretical_rate:.4f}  margin = {self.margin}",
            f"result: {'PASS' if self.passed else 'FAIL'}" + (f" ({self.diagnostics})" if self.diagnostics else ""),
        ]
        if self.s4_prefactors:
            lines.append("log-delta prefactor (C2 = 1 placeholder): delta, prefactor, prefactor * delta^rate")
            lines += [f"  {d!r}, {p:.6g}, {q:.6g}" for d, p, q in self.s4_prefactors]
        return "\n".join(lines)


def rate_report(
    fit: RateFit,
    constants: Optional[C.ConstantsReport] = None,
    *,
    margin: float = DEFAULT_MARGIN,
    dim_d: Optional[int] = None,
) -> RateReport:
    """Pass when slope >= theoretical_rate - margin and the errors decrease within 2 sigma."""
    if fit.degenerate:
        return RateReport(False, math.nan, fit.theoretical_rate, margin, False, True,
                          "degenerate fit: zero error on the ladder (exact scheme)", fit=fit)
    ok_rate = fit.slope >= fit.theoretical_rate - margin
    decreasing, bad = decreasing_within(fit)
    notes = []
    if not ok_rate:
        notes.append(f"slope {fit.slope:.4f} below {fit.theoretical_rate:.4f} - {margin}")
    if not decreasing:
        notes.append(f"errors increase beyond 2 combined standard errors at delta {bad}")
    s4, tail_ok = (), None
    if constants is not None:
        d = dim_d if dim_d is not None else constants.d
        a = constants.inputs
        rows = []
        for delta in sorted(fit.deltas, reverse=True):
            pre = C.s4_prefactor(delta, fit.beta, a.alpha, d, float(constants.gamma0), a.p)
            rows.append((float(delta), pre, pre * delta**fit.theoretical_rate))
        s4 = tuple(rows)
        tail = [r[2] for r in rows[-3:]]
        tail_ok = all(b < a_ for a_, b in zip(tail, tail[1:]))
    return RateReport(True, fit.slope, fit.theoretical_rate, margin, bool(ok_rate and decreasing),
                      bool(decreasing), "; ".join(notes), s4, tail_ok, fit)


# ---------------------------------------------------------------- config I/O

CONFIG_KEYS = ("model", "x0", "T", "deltas", "ref_refinement", "beta", "n_paths", "seed",
               "truncation_mode", "truncation_k")
_KEY_TO_FIELD = {"model": "model_label", "deltas": "delta_ladder"}


def _parse_real(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return float(base) ** float(exp)
    return float(text)


def _parse_value(key: str, text: str):
    text = text.strip()
    if key == "model" or key == "truncation_mode":
        if not text:
            raise ValueError("empty value")
        return text
    if key in ("x0", "deltas"):
        if text.lower() in ("", "none") and key == "x0":
            return None
        return tuple(_parse_real(t) for t in text.split(",") if t.strip())
    if key in ("ref_refinement", "n_paths", "seed"):
        return int(text)
    if key == "truncation_k":
        return None if text.lower() in ("", "none") else _parse_real(text)
    return _parse_real(text)


def config_overrides(pairs: dict) -> dict:
    """Typed StudyConfig fields from raw key -> text pairs (unknown keys rejected)."""
    out = {}
    for key, text in pairs.items():
        if key not in CONFIG_KEYS:
            raise ConfigurationError("harness.load_config", f"unknown key {key!r}; expected one of {CONFIG_KEYS}")
        try:
            out[_KEY_TO_FIELD.get(key, key)] = _parse_value(key, text)
        except ValueError as exc:
            raise ConfigurationError("harness.load_config", f"key {key!r}: cannot parse {text!r} ({exc})") from None
    return out


def parse_config_values(text: str, source: str = "<config>") -> dict:
    """Typed StudyConfig fields for the keys present in ``text``; errors name the line."""
    where = "harness.load_config"
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(where, f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(where, f"{source}:{lineno}: unknown key {key!r}; expected one of {CONFIG_KEYS}")
        if key in seen:
            raise ConfigurationError(where, f"{source}:{lineno}: duplicate key {key!r} (first on line {seen[key]})")
        seen[key] = lineno
        try:
            values[_KEY_TO_FIELD.get(key, key)] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigurationError(where, f"{source}:{lineno}: cannot parse {key} = {value!r} ({exc})") from None
    return values


def build_config(values: dict, source: str = "<config>") -> StudyConfig:
    try:
        return StudyConfig(**values)
    except ConfigurationError as exc:
        raise ConfigurationError("harness.load_config", f"{source}: {exc.message}") from None


def parse_config(text: str, source: str = "<config>") -> StudyConfig:
    return build_config(parse_config_values(text, source), source)


def load_config(path) -> StudyConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def format_config(config: StudyConfig) -> str:
    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            return ",".join(repr(float(t)) for t in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = []
    for key in CONFIG_KEYS:
        lines.append(f"{key} = {fmt(getattr(config, _KEY_TO_FIELD.get(key, key)))}")
    return "\n".join(lines) + "\n"


def write_config(config: StudyConfig, path) -> None:
    atomic_write_text(path, format_config(config))


# ------------------------------------------------------------------- CSV I/O


def atomic_write_text(path, text: str) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or Path("."))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(fit: RateFit) -> str:
    rows = [CSV_HEADER]
    for delta, mean, se in fit.points:
        rows.append(f"{delta!r},{mean!r},{se!r},{fit.n_paths},{fit.beta!r},{fit.theoretical_rate!r}")
    rows.append(f"# slope={fit.slope!r} r2={fit.r_squared!r}")
    return "\n".join(rows) + "\n"


def write_csv(fit_or_report, path) -> None:
    fit = fit_or_report.fit if isinstance(fit_or_report, RateReport) else fit_or_report
    atomic_write_text(path, format_csv(fit))


def read_csv(path) -> RateFit:
    where = "harness.read_csv"
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ConfigurationError(where, f"{path}: header must be {CSV_HEADER!r}")
    points, slope, r2, n_paths, beta, rate = [], math.nan, math.nan, 0, math.nan, math.nan
    for lineno, line in enumerate(lines[1:], 2):
        if line.startswith("#"):
            for tok in line[1:].split():
                k, _, v = tok.partition("=")
                if k == "slope":
                    slope = float(v)
                elif k == "r2":
                    r2 = float(v)
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise ConfigurationError(where, f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
        d, m, s, n, b, t = parts
        points.append((float(d), float(m), float(s)))
        n_paths, beta, rate = int(n), float(b), float(t)
    degenerate = not math.isfinite(slope)
    return RateFit(tuple(points), slope, math.nan, r2, rate, beta=beta, n_paths=n_paths, degenerate=degenerate)
