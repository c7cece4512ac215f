"""Log-log slope fits shared by every convergence check."""
from __future__ import annotations

import numpy as np
from scipy import stats

from ..errors import PreconditionError


def fit_slope(xs, ys):
    """Least-squares slope of log y against log x, with its standard error."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise PreconditionError("xs and ys must be 1-D arrays of equal length")
    if len(xs) < 4:
        raise PreconditionError("slope fit needs at least 4 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise PreconditionError("slope fit needs strictly positive data")
    dx = np.diff(xs)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise PreconditionError("xs must be strictly monotone")
    res = stats.linregress(np.log(xs), np.log(ys))
    return float(res.slope), float(res.stderr)
