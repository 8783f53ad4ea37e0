"""Monte Carlo summaries and log-log rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


def mean_and_stderr(values) -> tuple[float, float]:
    """Sample mean and standard error; a single fixed-order reduction over the array."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    weighted: bool


def fit_loglog(x, y, stderr=None) -> LogLogFit:
    """Least squares of log y on log x.

    With ``stderr`` given (and all positive) each point is weighted by the
    inverse variance of log y, i.e. ``(y / stderr)**2`` by the delta method.
    """
    lx = np.log(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    ly = np.log(y)
    weighted = stderr is not None and np.all(np.asarray(stderr) > 0)
    w = (y / np.asarray(stderr, dtype=float)) ** 2 if weighted else np.ones_like(ly)
    sw = w.sum()
    mx, my = (w * lx).sum() / sw, (w * ly).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    slope = float((w * (lx - mx) * (ly - my)).sum() / sxx)
    intercept = float(my - slope * mx)
    resid = ly - (intercept + slope * lx)
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (ly - my) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if weighted:
        se = math.sqrt(1.0 / sxx)
    else:
        n = lx.size
        se = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else float("nan")
    return LogLogFit(slope, intercept, max(0.0, min(1.0, r2)), se, bool(weighted))
