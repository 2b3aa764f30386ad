"""Support-point selection and the EBM-Tobit resampling driver.

EBM-Tobit alternates two moves for ``l = 1..B``:

1. fit NPMLE weights on the current atoms ``t^(l-1)`` and record the
   posterior means ``theta^(l)``;
2. draw ``m`` atoms ``mu_k`` from the fitted prior and jitter each with
   ``N_p(0, sigma^2 I)`` to get ``t^(l)``.

The estimate is the average of ``theta^(l)`` over ``l > burn_in``. The first
support is the generalized exemplar (per-cell MLE) set.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .censored_data import CensoredMatrix
from .errors import ConfigInvalid, DimensionTooHigh, UnboundedCell
from .npmle import DiscretePrior, SolveDiagnostics, fit_prior
from .posterior import posterior_mean, posterior_weights
from .tobit_kernel import SupportSet, loglik_matrix

__all__ = [
    "NoiseMode",
    "EbmTobitConfig",
    "EbmTobitResult",
    "make_rng",
    "grid_support",
    "exemplar_mle_support",
    "oracle_support",
    "sample_support_from_prior",
    "ebm_tobit",
    "MAX_GRID_DIM",
]

MAX_GRID_DIM = 4


class NoiseMode(str, enum.Enum):
    HOMOSKEDASTIC = "homoskedastic"
    COLUMN_MEAN = "column_mean"
    CELL_MATCHED = "cell_matched"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *(int(k) for k in keys)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class EbmTobitConfig:
    B: int = 50
    burn_in: int = 0
    m: int | None = None
    noise_mode: NoiseMode = NoiseMode.HOMOSKEDASTIC
    noise_sd: float = 1.0
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 10000
    kkt: bool = True
    record_means: bool = False

    def __post_init__(self):
        object.__setattr__(self, "noise_mode", NoiseMode(self.noise_mode))
        if self.B < 1:
            raise ConfigInvalid(f"B must be >= 1, got {self.B}")
        if not 0 <= self.burn_in < self.B:
            raise ConfigInvalid(f"burn_in must satisfy 0 <= burn_in < B, got {self.burn_in}")
        if self.m is not None and self.m < 1:
            raise ConfigInvalid(f"m must be >= 1, got {self.m}")
        if self.noise_mode is NoiseMode.CELL_MATCHED:
            raise ConfigInvalid("cell_matched jitter is undefined: sampled atoms are not tied to rows")
        if not self.noise_sd >= 0:
            raise ConfigInvalid(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass
class EbmTobitResult:
    theta_hat: np.ndarray
    final_prior: DiscretePrior
    loglik: np.ndarray
    diagnostics: list[SolveDiagnostics]
    per_iter_means: list[np.ndarray] | None = None
    config: EbmTobitConfig = field(default_factory=EbmTobitConfig)

    @property
    def all_converged(self) -> bool:
        return all(d.converged for d in self.diagnostics)


def _finite_range(data: CensoredMatrix):
    lo = np.empty(data.p)
    hi = np.empty(data.p)
    for j in range(data.p):
        v = np.concatenate([data.L[:, j], data.R[:, j]])
        v = v[np.isfinite(v)]
        if v.size == 0:
            raise UnboundedCell(f"column {j} has no finite endpoint")
        lo[j], hi[j] = v.min(), v.max()
    return lo, hi


def grid_support(data: CensoredMatrix, points_per_axis: int) -> SupportSet:
    """Regular grid over each column's finite endpoint range; ``points_per_axis**p`` atoms."""
    if data.p > MAX_GRID_DIM:
        raise DimensionTooHigh(f"regular grid support is limited to p <= {MAX_GRID_DIM}, got p={data.p}")
    if points_per_axis < 2:
        raise ConfigInvalid("points_per_axis must be >= 2")
    lo, hi = _finite_range(data)
    axes = [np.linspace(lo[j], hi[j], points_per_axis) for j in range(data.p)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return SupportSet(np.stack([g.ravel() for g in mesh], axis=1))


def exemplar_mle_support(data: CensoredMatrix) -> SupportSet:
    """Per-cell Tobit MLEs as atoms, one per row.

    Point cells keep their value, finite intervals map to the midpoint, and a
    half-infinite interval maps to its finite endpoint.
    """
    L, R = data.L, data.R
    finL, finR = np.isfinite(L), np.isfinite(R)
    if (~finL & ~finR).any():
        i, j = np.argwhere(~finL & ~finR)[0]
        raise UnboundedCell(f"cell ({i}, {j}) has no finite endpoint")
    out = np.where(finL & finR, 0.5 * (np.where(finL, L, 0) + np.where(finR, R, 0)), 0.0)
    out = np.where(finL & ~finR, L, out)
    out = np.where(~finL & finR, R, out)
    out = np.where(L == R, L, out)
    return SupportSet(out)


def oracle_support(theta_true) -> SupportSet:
    """The true means as atoms (simulation only); duplicates are kept."""
    return SupportSet(np.array(theta_true, dtype=float))


def _jitter_scale(cfg: EbmTobitConfig, data: CensoredMatrix):
    if cfg.noise_mode is NoiseMode.HOMOSKEDASTIC:
        return np.full(data.p, cfg.noise_sd)
    return data.sigma.mean(axis=0)


def sample_support_from_prior(prior: DiscretePrior, m: int, noise, rng: np.random.Generator) -> SupportSet:
    """Draw ``m`` atoms from ``prior`` and add Gaussian jitter.

    ``noise`` is a scalar standard deviation or one value per column.
    """
    if m < 1:
        raise ConfigInvalid("m must be >= 1")
    idx = rng.choice(prior.m, size=m, p=prior.weights)
    scale = np.broadcast_to(np.asarray(noise, dtype=float), (prior.p,))
    jitter = rng.standard_normal((m, prior.p)) * scale[None, :]
    return SupportSet(prior.support.points[idx] + jitter)


def ebm_tobit(data: CensoredMatrix, cfg: EbmTobitConfig | None = None, *,
              initial_support: SupportSet | None = None) -> EbmTobitResult:
    """Run EBM-Tobit and return the averaged posterior means."""
    cfg = cfg or EbmTobitConfig()
    m = cfg.m if cfg.m is not None else data.n
    rng = make_rng(cfg.seed)
    scale = _jitter_scale(cfg, data)
    support = initial_support if initial_support is not None else exemplar_mle_support(data)

    total = np.zeros((data.n, data.p))
    kept = 0
    means = [] if cfg.record_means else None
    diags: list[SolveDiagnostics] = []
    lls = np.empty(cfg.B)
    prior = None
    for it in range(1, cfg.B + 1):
        ll = loglik_matrix(data, support)
        prior, diag = fit_prior(ll, support, tol=cfg.tol, max_iter=cfg.max_iter, kkt=cfg.kkt)
        theta_l = posterior_mean(posterior_weights(ll, prior), support)
        diags.append(diag)
        lls[it - 1] = diag.final_loglik
        if means is not None:
            means.append(theta_l)
        if it > cfg.burn_in:
            total += theta_l
            kept += 1
        if it < cfg.B:
            support = sample_support_from_prior(prior, m, scale, rng)
    return EbmTobitResult(
        theta_hat=total / kept,
        final_prior=prior,
        loglik=lls,
        diagnostics=diags,
        per_iter_means=means,
        config=cfg,
    )
