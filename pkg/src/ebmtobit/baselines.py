"""Comparator estimators: fill-in rules and independence-restricted priors."""

from __future__ import annotations

import enum
import math
import warnings

import numpy as np

from .censored_data import CensoredMatrix, validate
from .errors import DimensionMismatch, RuleInapplicable
from .npmle import fit_prior
from .posterior import posterior_mean, posterior_weights
from .tobit_kernel import SupportSet, loglik_matrix

__all__ = ["FillInRule", "FillInWarning", "fill_in", "vectorized_eb", "mean_field_eb", "univariate_eb"]


class FillInRule(str, enum.Enum):
    MIDPOINT_MLE = "midpoint_mle"
    HALF_DETECTION_LIMIT = "half_detection_limit"
    DETECTION_LIMIT_OVER_SQRT2 = "detection_limit_over_sqrt2"
    AT_DETECTION_LIMIT = "at_detection_limit"


class FillInWarning(UserWarning):
    """A detection-limit rule was applied to a non-positive limit."""


_LOD_FACTOR = {
    FillInRule.AT_DETECTION_LIMIT: 1.0,
    FillInRule.HALF_DETECTION_LIMIT: 0.5,
    FillInRule.DETECTION_LIMIT_OVER_SQRT2: 1.0 / math.sqrt(2.0),
}


def fill_in(data: CensoredMatrix, rule) -> np.ndarray:
    """Single-value imputation of censored cells; point cells are copied unchanged.

    ``MIDPOINT_MLE`` uses ``(L + R) / 2`` (the finite endpoint for a
    half-infinite cell). The detection-limit rules scale the upper endpoint
    ``R`` and refuse cells with ``R = +inf``.
    """
    rule = FillInRule(rule)
    L, R = data.L, data.R
    cen = L < R
    out = np.array(L, dtype=float)
    if rule is FillInRule.MIDPOINT_MLE:
        finL, finR = np.isfinite(L), np.isfinite(R)
        if (cen & ~finL & ~finR).any():
            raise RuleInapplicable("midpoint rule needs at least one finite endpoint")
        mid = np.where(finL & finR, 0.5 * (np.where(finL, L, 0.0) + np.where(finR, R, 0.0)),
                       np.where(finL, L, R))
        out[cen] = mid[cen]
        return out
    if (cen & ~np.isfinite(R)).any():
        i, j = np.argwhere(cen & ~np.isfinite(R))[0]
        raise RuleInapplicable(f"{rule.value} needs a finite detection limit; cell ({i}, {j}) has R = +inf")
    if rule is not FillInRule.AT_DETECTION_LIMIT and (cen & (R <= 0)).any():
        warnings.warn(
            f"{rule.value} applied to non-positive detection limits; the rule presumes concentrations",
            FillInWarning,
            stacklevel=2,
        )
    out[cen] = _LOD_FACTOR[rule] * R[cen]
    return out


def univariate_eb(data: CensoredMatrix, support_1d, tol: float = 1e-8, max_iter: int = 10000,
                  kkt: bool = True):
    """Fit one prior on the real line to every cell of a single-column problem.

    Identical cells are pooled with multiplicities before fitting, which gives
    the same optimum at a fraction of the cost. Returns
    ``(posterior_means (n,), prior, diagnostics)``.
    """
    if data.p != 1:
        raise DimensionMismatch(f"univariate problem needs p=1, got p={data.p}")
    support = SupportSet(np.asarray(support_1d, dtype=float).reshape(-1, 1))
    cells = np.stack([data.L[:, 0], data.R[:, 0], data.sigma[:, 0]], axis=1)
    uniq, inverse, counts = np.unique(cells, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    pooled = validate(uniq[:, :1], uniq[:, 1:2], uniq[:, 2:3])
    ll = loglik_matrix(pooled, support)
    prior, diag = fit_prior(ll, support, tol=tol, max_iter=max_iter, counts=counts, kkt=kkt)
    means = posterior_mean(posterior_weights(ll, prior), support)[:, 0]
    return means[inverse], prior, diag


def vectorized_eb(data: CensoredMatrix, support_1d, tol: float = 1e-8, max_iter: int = 10000,
                  kkt: bool = True) -> np.ndarray:
    """Treat all ``n*p`` cells as exchangeable draws from one prior on the real line."""
    means, _, _ = univariate_eb(data.flatten(), support_1d, tol, max_iter, kkt)
    return means.reshape(data.n, data.p)


def mean_field_eb(data: CensoredMatrix, per_column_support, tol: float = 1e-8,
                  max_iter: int = 10000, kkt: bool = True) -> np.ndarray:
    """Independent univariate prior per column (product-form prior)."""
    if len(per_column_support) != data.p:
        raise DimensionMismatch(f"{len(per_column_support)} support vectors for p={data.p} columns")
    out = np.empty((data.n, data.p))
    for j in range(data.p):
        out[:, j], _, _ = univariate_eb(data.column(j), per_column_support[j], tol, max_iter, kkt)
    return out
