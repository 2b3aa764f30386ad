"""Log-domain Tobit likelihood for point and interval-censored Gaussian cells.

A point cell ``L == R`` contributes ``log phi_sigma(L - theta)``; an interval
cell contributes ``log(Phi_sigma(R - theta) - Phi_sigma(L - theta))``.
The interval mass is evaluated on the standardized scale ``a < b`` as

* ``b <= 0``: ``log Phi(b) + log(1 - exp(log Phi(a) - log Phi(b)))``
* ``a >= 0``: the mirror image using the upper tail ``Phi(-x)``
* ``a < 0 < b``: ``log((erf(b/sqrt2) + erf(-a/sqrt2)) / 2)``, a sum of two
  positive terms, so there is no cancellation

which keeps far-tail intervals (many sigmas away from ``theta``) finite and
accurate instead of subtracting two numbers that both round to 0 or 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, log_ndtr, ndtr

from .censored_data import CensoredMatrix
from .errors import DegenerateRow, DimensionMismatch, InvalidCell

__all__ = [
    "SupportSet",
    "LogLikMatrix",
    "norm_cdf",
    "log_interval_mass",
    "cell_loglik",
    "row_loglik",
    "loglik_matrix",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class SupportSet:
    """``m x p`` candidate prior atoms."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionMismatch(f"support must be a non-empty m x p matrix, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidCell("support coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class LogLikMatrix:
    """``values[i, k] = log P(L_i, R_i | theta_i = t_k)``."""

    values: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def norm_cdf(x):
    """Standard normal CDF."""
    return ndtr(x)


def log_interval_mass(a, b):
    """``log(Phi(b) - Phi(a))`` for standardized endpoints ``a < b`` (broadcasting)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    out = np.empty(a.shape)
    lower = b <= 0
    upper = a >= 0
    mid = ~(lower | upper)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if lower.any():
            la, lb = log_ndtr(a[lower]), log_ndtr(b[lower])
            out[lower] = lb + np.log(-np.expm1(la - lb))
        if upper.any():
            ua, ub = log_ndtr(-a[upper]), log_ndtr(-b[upper])
            out[upper] = ua + np.log(-np.expm1(ub - ua))
        if mid.any():
            s = erf(b[mid] / _SQRT2) + erf(-a[mid] / _SQRT2)
            out[mid] = np.log(0.5 * s)
    # both endpoints so deep in one tail that log_ndtr agrees: mass underflows
    out[np.isnan(out)] = -np.inf
    return out


def _cell_loglik_array(L, R, theta, sigma):
    L, R, theta, sigma = np.broadcast_arrays(
        np.asarray(L, float), np.asarray(R, float), np.asarray(theta, float), np.asarray(sigma, float)
    )
    out = np.empty(L.shape)
    pt = L == R
    if pt.any():
        z = (L[pt] - theta[pt]) / sigma[pt]
        out[pt] = -0.5 * z * z - np.log(sigma[pt]) - LOG_SQRT_2PI
    iv = ~pt
    if iv.any():
        s = sigma[iv]
        out[iv] = log_interval_mass((L[iv] - theta[iv]) / s, (R[iv] - theta[iv]) / s)
    return out


def cell_loglik(L, R, theta, sigma=1.0):
    """Log Tobit likelihood of one cell (or broadcast arrays of cells).

    Examples
    --------
    >>> round(float(cell_loglik(0.0, 0.0, 0.0)), 9)
    -0.918938533
    >>> round(float(cell_loglik(-np.inf, 0.0, 0.0)), 12) == round(math.log(0.5), 12)
    True
    """
    La, Ra, sa = np.asarray(L, float), np.asarray(R, float), np.asarray(sigma, float)
    if np.any(La > Ra):
        raise InvalidCell("lower endpoint exceeds upper endpoint")
    if np.any(~(sa > 0)):
        raise InvalidCell("sigma must be positive")
    if np.any(~np.isfinite(np.asarray(theta, float))):
        raise InvalidCell("theta must be finite")
    out = _cell_loglik_array(La, Ra, theta, sa)
    return float(out) if out.ndim == 0 else out


def row_loglik(data: CensoredMatrix, i: int, t) -> float:
    """Sum of cell log-likelihoods of row ``i`` at the point ``t``, left to right over columns."""
    t = np.asarray(t, dtype=float).ravel()
    if t.shape[0] != data.p:
        raise DimensionMismatch(f"point has {t.shape[0]} coordinates, data has p={data.p}")
    cells = _cell_loglik_array(data.L[i], data.R[i], t, data.sigma[i])
    total = 0.0
    for v in cells:
        total += v
    return float(total)


def loglik_matrix(data: CensoredMatrix, support: SupportSet, *, check: bool = True,
                  chunk_rows: int = 2048) -> LogLikMatrix:
    """Build the ``n x m`` matrix of row log-likelihoods against every atom.

    Columns are accumulated in order ``j = 0..p-1`` so the result does not
    depend on chunking. With ``check`` (the default) a row that is impossible
    for every atom raises :class:`DegenerateRow`.
    """
    if support.p != data.p:
        raise DimensionMismatch(f"support has p={support.p}, data has p={data.p}")
    n, m = data.n, support.m
    T = support.points
    out = np.zeros((n, m))
    for start in range(0, n, chunk_rows):
        stop = min(start + chunk_rows, n)
        block = out[start:stop]
        for j in range(data.p):
            Lj = data.L[start:stop, j]
            Rj = data.R[start:stop, j]
            sj = data.sigma[start:stop, j]
            tj = T[:, j][None, :]
            pt = Lj == Rj
            if pt.any():
                z = (Lj[pt, None] - tj) / sj[pt, None]
                block[pt] += -0.5 * z * z - (np.log(sj[pt]) + LOG_SQRT_2PI)[:, None]
            iv = ~pt
            if iv.any():
                s = sj[iv, None]
                block[iv] += log_interval_mass((Lj[iv, None] - tj) / s, (Rj[iv, None] - tj) / s)
    if check:
        dead = ~np.isfinite(out).any(axis=1) if m else np.ones(n, bool)
        if dead.any():
            raise DegenerateRow(np.flatnonzero(dead).tolist())
    return LogLikMatrix(out)
