"""Posterior summaries under a fitted discrete prior.

For atoms ``t_k`` with weights ``w_k`` the posterior over atoms for row ``i``
is ``w_k exp(loglik[i, k])`` normalized over ``k``; the posterior mean is the
weighted average of atoms, and so on. Ties (mode, medoid) go to the lowest
atom index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .censored_data import CensoredMatrix, validate
from .errors import DimensionMismatch, ZeroMarginalRow
from .npmle import DiscretePrior
from .tobit_kernel import LogLikMatrix, SupportSet, loglik_matrix

__all__ = [
    "PosteriorSummary",
    "posterior_weights",
    "posterior_mean",
    "posterior_variance",
    "posterior_mode",
    "posterior_medoid",
    "summarize",
    "impute_new",
]


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    post_weights: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    mode_index: np.ndarray
    medoid_index: np.ndarray


def _points(support) -> np.ndarray:
    return support.points if isinstance(support, SupportSet) else np.atleast_2d(np.asarray(support, float))


def _check(post_weights, support):
    P = np.asarray(post_weights, dtype=float)
    T = _points(support)
    if P.ndim != 2 or P.shape[1] != T.shape[0]:
        raise DimensionMismatch(f"posterior weights {P.shape} do not match {T.shape[0]} atoms")
    return P, T


def posterior_weights(loglik, prior: DiscretePrior) -> np.ndarray:
    """Row-normalized ``w_k exp(loglik[i, k])``, computed with a per-row logsumexp."""
    V = loglik.values if isinstance(loglik, LogLikMatrix) else np.asarray(loglik, dtype=float)
    if V.ndim != 2 or V.shape[1] != prior.m:
        raise DimensionMismatch(f"loglik shape {V.shape} does not match {prior.m} atoms")
    with np.errstate(divide="ignore"):
        A = V + np.log(prior.weights)[None, :]
    lse = logsumexp(A, axis=1, keepdims=True)
    bad = ~np.isfinite(lse[:, 0])
    if bad.any():
        raise ZeroMarginalRow(np.flatnonzero(bad).tolist())
    return np.exp(A - lse)


def _wsum(P, T):
    # einsum, not BLAS: the per-row reduction order must not depend on how many rows are passed
    return np.einsum("ik,kj->ij", P, T)


def posterior_mean(post_weights, support) -> np.ndarray:
    P, T = _check(post_weights, support)
    return _wsum(P, T)


def posterior_variance(post_weights, support) -> np.ndarray:
    """Per-coordinate second moment minus squared mean, clamped at zero."""
    P, T = _check(post_weights, support)
    mean = _wsum(P, T)
    return np.maximum(_wsum(P, T * T) - mean * mean, 0.0)


def posterior_mode(post_weights, support):
    """Most probable atom per row; returns ``(points, indices)``."""
    P, T = _check(post_weights, support)
    idx = np.argmax(P, axis=1)  # first maximum wins
    return T[idx], idx


def posterior_medoid(post_weights, support, block: int = 256):
    """Atom minimizing posterior-expected Euclidean distance; returns ``(points, indices)``.

    The medoid is restricted to the support set.
    """
    P, T = _check(post_weights, support)
    m = T.shape[0]
    idx = np.empty(P.shape[0], dtype=np.intp)
    # risk[i, j] = sum_k P[i, k] * ||t_k - t_j||, built in atom blocks to bound memory
    risk = np.empty((P.shape[0], m))
    for s in range(0, m, block):
        e = min(s + block, m)
        dist = np.sqrt(((T[:, None, :] - T[None, s:e, :]) ** 2).sum(axis=2))
        risk[:, s:e] = P @ dist
    idx[:] = np.argmin(risk, axis=1)
    return T[idx], idx


def summarize(loglik, prior: DiscretePrior, *, medoid: bool = True) -> PosteriorSummary:
    W = posterior_weights(loglik, prior)
    mean = posterior_mean(W, prior.support)
    var = posterior_variance(W, prior.support)
    _, mode_idx = posterior_mode(W, prior.support)
    if medoid:
        _, med_idx = posterior_medoid(W, prior.support)
    else:
        med_idx = np.full(W.shape[0], -1, dtype=np.intp)
    return PosteriorSummary(W, mean, var, mode_idx, med_idx)


def impute_new(row, prior: DiscretePrior, sigma=None):
    """Posterior mean, variance and atom weights for new rows; the prior is not refit.

    ``row`` is a :class:`CensoredMatrix` (any number of rows) or an ``(L, R)``
    pair of vectors. Returns arrays with a leading row axis when more than one
    row is passed, otherwise vectors.
    """
    if isinstance(row, CensoredMatrix):
        data = row
    else:
        L, R = row
        data = validate(np.atleast_2d(L), np.atleast_2d(R), sigma)
    if data.p != prior.p:
        raise DimensionMismatch(f"row has p={data.p}, prior has p={prior.p}")
    ll = loglik_matrix(data, prior.support, check=False)
    W = posterior_weights(ll, prior)
    mean = posterior_mean(W, prior.support)
    var = posterior_variance(W, prior.support)
    if data.n == 1:
        return mean[0], var[0], W[0]
    return mean, var, W
