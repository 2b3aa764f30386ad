"""Mixture weights over fixed atoms by nonparametric maximum likelihood.

Maximizes ``sum_i log sum_k w_k exp(loglik[i, k])`` over the probability
simplex with the classical EM fixed-point update

    w_k <- w_k * (1/n) sum_i exp(loglik[i, k]) / f_i,   f_i = sum_k w_k exp(loglik[i, k])

accelerated by SQUAREM extrapolation (Varadhan and Roland, 2008). Each
accepted step is checked for ascent, so the objective trace never decreases.

Rows are rescaled by their maximum before exponentiation (the logsumexp
shift), which keeps every ``exp`` in ``[0, 1]``.

Stopping. The relative change of the objective falling below ``tol`` is
necessary but not sufficient: EM shrinks atoms that belong to no optimum only
geometrically, so the solver also requires the KKT conditions

    |D_k - 1| <= tol  for w_k > 1e-12,       D_k <= 1 + tol  otherwise,

with ``D_k = (1/n) sum_i exp(loglik[i, k]) / f_i``. Once the objective has
stalled, atoms with small weight and ``D_k < 1`` are dropped (a first-order
ascent move) and dropped atoms with ``D_k > 1`` are re-seeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateInput, DegenerateRow, DimensionMismatch
from .tobit_kernel import LogLikMatrix, SupportSet

__all__ = [
    "DiscretePrior",
    "SolveDiagnostics",
    "marginal_loglik",
    "solve_weights",
    "stationarity_ratios",
    "fit_prior",
]

ACTIVE_WEIGHT = 1e-12
TRUNCATE_WEIGHT = 1e-15
_PRUNE_WEIGHT = 1e-3
_RESEED_WEIGHT = 1e-8
_ASCENT_SLACK = 1e-10


@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Atoms plus simplex weights; weights are renormalized on construction."""

    support: SupportSet
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.shape[0] != self.support.m:
            raise DimensionMismatch(f"{w.shape[0]} weights for {self.support.m} atoms")
        if not np.isfinite(w).all() or (w < 0).any() or w.sum() <= 0:
            raise DegenerateInput("weights must be nonnegative, finite, and not all zero")
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.support.m

    @property
    def p(self) -> int:
        return self.support.p

    def mean(self) -> np.ndarray:
        return self.weights @ self.support.points

    def n_active(self, threshold: float = 1e-6) -> int:
        return int(np.count_nonzero(self.weights > threshold))


@dataclass
class SolveDiagnostics:
    final_loglik: float
    iterations: int
    converged: bool
    loglik_trace: np.ndarray | None = None
    max_residual: float = float("nan")
    notes: list = field(default_factory=list)


def _values(loglik) -> np.ndarray:
    return loglik.values if isinstance(loglik, LogLikMatrix) else np.asarray(loglik, dtype=float)


def marginal_loglik(loglik, weights) -> float:
    """``sum_i logsumexp_k(log w_k + loglik[i, k])``, evaluated fully in the log domain."""
    V = _values(loglik)
    w = np.asarray(weights, dtype=float).ravel()
    if V.ndim != 2 or V.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"loglik shape {V.shape} incompatible with {w.shape[0]} weights")
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    return float(np.sum(logsumexp(V + logw[None, :], axis=1)))


class _Scaled:
    """Row-max shifted likelihoods ``F = exp(loglik - rowmax)`` and helpers.

    Iterates carry ``(w, lf)`` with ``lf = log(F @ w)`` so each EM update costs
    two matrix-vector products.
    """

    def __init__(self, V, counts=None):
        self.V = V
        self.rowmax = V.max(axis=1)
        self.F = np.exp(V - self.rowmax[:, None])
        self.c = np.ones(V.shape[0]) if counts is None else np.asarray(counts, dtype=float)
        self.N = float(self.c.sum())
        self.offset = float(self.c @ self.rowmax)

    def marg(self, w):
        f = self.F @ w
        small = f < 1e-280
        if small.any():
            # rescaled densities underflow only for rows carried by tiny weights
            with np.errstate(divide="ignore"):
                logw = np.log(w)
            lf = np.log(np.where(small, 1.0, f))
            lf[small] = logsumexp(self.V[small] + logw[None, :], axis=1) - self.rowmax[small]
            return lf
        return np.log(f)

    def total(self, lf):
        return float(self.c @ lf) + self.offset

    def loglik(self, w):
        return self.total(self.marg(w))

    def ratios(self, w, lf=None):
        if lf is None:
            lf = self.marg(w)
        with np.errstate(over="ignore"):
            inv = self.c * np.exp(-lf)
        return (self.F.T @ inv) / self.N

    def em(self, w, lf=None):
        w = w * self.ratios(w, lf)
        w = w / w.sum()
        lf = self.marg(w)
        return w, lf, self.total(lf)


def stationarity_ratios(loglik, weights, counts=None) -> np.ndarray:
    """``D_k = (1/n) sum_i exp(loglik[i, k] - log f_i)``; equals 1 on the optimum's support."""
    return _Scaled(_values(loglik), counts).ratios(np.asarray(weights, float))


def _em_step(S: _Scaled, w, lf, ll):
    return S.em(w, lf)


def _squarem(S: _Scaled, w, lf, ll):
    """One SQUAREM (S3 step length) extrapolation; falls back to two EM steps."""
    w1, lf1, _ = S.em(w, lf)
    w2, lf2, ll2 = S.em(w1, lf1)
    r = w1 - w
    v = w2 - w1 - r
    nv = np.linalg.norm(v)
    if nv == 0.0 or not np.isfinite(nv):
        return w2, lf2, ll2
    alpha = min(-np.linalg.norm(r) / nv, -1.0)
    for _ in range(30):
        wx = w - 2.0 * alpha * r + alpha * alpha * v
        if (wx >= 0).all():
            break
        alpha = 0.5 * (alpha - 1.0)
    else:
        return w2, lf2, ll2
    if alpha == -1.0:
        return w2, lf2, ll2
    wx = wx / wx.sum()
    lfx = S.marg(wx)
    llx = S.total(lfx)
    if np.isfinite(llx) and llx >= ll2:
        return wx, lfx, llx
    return w2, lf2, ll2


def solve_weights(loglik, tol: float = 1e-8, max_iter: int = 10000, *, counts=None,
                  init=None, accelerate: bool = True, kkt: bool = True, record_trace: bool = False):
    """Fit simplex weights on fixed atoms.

    Parameters
    ----------
    loglik : LogLikMatrix or array (n, m)
        Row-by-atom log-likelihoods; ``-inf`` entries are allowed.
    tol : float
        Tolerance on the relative objective change per iteration and on the
        KKT residual.
    max_iter : int
        Cap on outer iterations; hitting it leaves ``converged=False``.
    counts : array (n,), optional
        Row multiplicities, for problems with repeated identical rows.
    init : array (m,), optional
        Starting weights; uniform by default.
    accelerate : bool
        Use SQUAREM steps instead of single EM updates.
    kkt : bool
        Require the KKT certificate before declaring convergence. With
        ``False`` the solver stops as soon as the relative change is below
        ``tol``; much cheaper on dense one-dimensional atom sets, where EM
        certifies optimality only after many thousands of iterations.
    record_trace : bool
        Keep the objective after every outer iteration.

    Returns
    -------
    weights : ndarray (m,)
    diagnostics : SolveDiagnostics
    """
    V = _values(loglik)
    if V.ndim != 2 or V.size == 0:
        raise DegenerateInput(f"empty or malformed log-likelihood matrix {V.shape}")
    if tol <= 0 or max_iter < 1:
        raise DegenerateInput("need tol > 0 and max_iter >= 1")
    n, m = V.shape
    if np.isnan(V).any():
        raise DegenerateInput("log-likelihood matrix contains NaN")
    dead = ~np.isfinite(V).any(axis=1)
    if dead.any():
        raise DegenerateRow(np.flatnonzero(dead).tolist())
    if counts is not None and np.asarray(counts).shape != (n,):
        raise DimensionMismatch("counts must have one entry per row")

    S = _Scaled(V, counts)
    if m == 1:
        ll = S.loglik(np.ones(1))
        return np.ones(1), SolveDiagnostics(ll, 0, True, np.array([ll]) if record_trace else None, 0.0)

    w = np.full(m, 1.0 / m) if init is None else np.asarray(init, float) / np.sum(init)
    lf = S.marg(w)
    ll = S.total(lf)
    trace = [ll] if record_trace else None
    step = _squarem if accelerate else _em_step

    converged = False
    it = 0
    while it < max_iter:
        it += 1
        w_new, lf_new, ll_new = step(S, w, lf, ll)
        if not ll_new >= ll - _ASCENT_SLACK:
            w_new, lf_new, ll_new = S.em(w, lf)
        rel = abs(ll_new - ll) / max(abs(ll), 1.0)
        w, lf, ll = w_new, lf_new, ll_new
        if rel < tol and not kkt:
            converged = True
        elif rel < tol:
            w, lf, ll, converged = _kkt_polish(S, w, lf, ll, tol)
        if trace is not None:
            trace.append(ll)
        if converged:
            break

    w = np.where(w < TRUNCATE_WEIGHT, 0.0, w)
    w /= w.sum()
    lf = S.marg(w)
    D = S.ratios(w, lf)
    diag = SolveDiagnostics(
        final_loglik=S.total(lf),
        iterations=it,
        converged=converged,
        loglik_trace=np.array(trace) if trace is not None else None,
        max_residual=float(np.max(np.abs(D[w > ACTIVE_WEIGHT] - 1.0))),
    )
    return w, diag


def _kkt_polish(S: _Scaled, w, lf, ll, tol):
    """Drop atoms EM is starving, re-seed atoms with positive gradient, test KKT.

    Both moves are first-order ascent directions and are kept only if the
    objective does not drop.
    """
    D = S.ratios(w, lf)
    active = w > ACTIVE_WEIGHT
    drop = active & (w < _PRUNE_WEIGHT) & (D < 1.0 - tol)
    if drop.any():
        w_try = np.where(drop, 0.0, w)
        w_try /= w_try.sum()
        lf_try = S.marg(w_try)
        ll_try = S.total(lf_try)
        if ll_try >= ll - _ASCENT_SLACK:
            w, lf, ll = w_try, lf_try, ll_try
            D = S.ratios(w, lf)
            active = w > ACTIVE_WEIGHT
    reseed = ~active & (D > 1.0 + tol)
    if reseed.any():
        w_try = np.where(reseed, np.maximum(w, _RESEED_WEIGHT), w)
        w_try /= w_try.sum()
        lf_try = S.marg(w_try)
        ll_try = S.total(lf_try)
        if ll_try >= ll - _ASCENT_SLACK:
            return w_try, lf_try, ll_try, False
        return w, lf, ll, False
    resid = float(np.max(np.abs(D[active] - 1.0)))
    return w, lf, ll, resid <= tol


def fit_prior(loglik, support: SupportSet, tol: float = 1e-8, max_iter: int = 10000, **kw):
    """:func:`solve_weights` wrapped into a :class:`DiscretePrior`."""
    w, diag = solve_weights(loglik, tol=tol, max_iter=max_iter, **kw)
    return DiscretePrior(support, w), diag
