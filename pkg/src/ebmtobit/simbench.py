"""Simulation bench for censored-matrix estimators.

Each replicate draws true means ``theta`` (n x p) from a multivariate normal,
picks ``ceil(frac_censored_cols * p)`` columns to censor, and in each of them
replaces every cell with ``theta_ij < LOD_j`` (``LOD_j`` the ``lod_quantile``
empirical quantile of the column) by the interval ``[LB_j, LOD_j]`` with
``LB_j = min(theta_.j) - 6 sd(theta_.j)``. All remaining cells are observed as
``theta_ij + N(0, noise_sd^2)``. Every method sees the same instance, and
metrics are computed against ``theta``.

Randomness for replicate ``r`` comes from a Philox stream keyed by
``(seed, r)``, so replicates can run in any order or in parallel.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.stats import rankdata

from .baselines import FillInRule, FillInWarning, fill_in, mean_field_eb, vectorized_eb
from .censored_data import CensoredMatrix, format_float, validate, write_matrix_csv
from .errors import ConfigInvalid, EbTobitError
from .npmle import fit_prior
from .posterior import posterior_mean, posterior_weights
from .support import (
    EbmTobitConfig,
    ebm_tobit,
    exemplar_mle_support,
    make_rng,
    oracle_support,
)
from .tobit_kernel import loglik_matrix

__all__ = [
    "SimConfig",
    "SimReport",
    "METHODS",
    "ORACLE_METHODS",
    "ar1_covariance",
    "generate_instance",
    "rmse",
    "spearman",
    "run_method",
    "run_experiment",
    "run_grid",
    "write_grid_tables",
    "circle_demo",
    "write_circle_demo",
]

METHODS = (
    "EBM-Tobit",
    "MidpointMLE",
    "Half-Min",
    "GeneralizedExemplarSupport",
    "OracleSupportPoints",
    "VectorizedOracle",
    "MeanFieldEB",
)
ORACLE_METHODS = frozenset({"OracleSupportPoints", "VectorizedOracle"})
METRICS = ("rmse_censored", "rmse_all", "spearman_censored", "spearman_all")


def ar1_covariance(p: int, rho: float = 0.7) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    p: int = 25
    frac_censored_cols: float = 0.3
    lod_quantile: float = 0.1
    reps: int = 200
    noise_sd: float = 1.0
    mean_vector: tuple | None = None
    covariance: tuple | None = None
    ar_rho: float = 0.7
    seed: int = 0
    B: int = 50
    tol: float = 1e-8
    max_iter: int = 10000
    # bench fits stop on the relative objective change alone (see npmle.solve_weights)
    kkt: bool = False

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ConfigInvalid(f"need n >= 2 and p >= 1, got n={self.n}, p={self.p}")
        if not 0 < self.lod_quantile < 1:
            raise ConfigInvalid(f"lod_quantile must lie in (0, 1), got {self.lod_quantile}")
        if not 0 <= self.frac_censored_cols <= 1:
            raise ConfigInvalid(f"frac_censored_cols must lie in [0, 1], got {self.frac_censored_cols}")
        if self.reps < 1:
            raise ConfigInvalid("reps must be >= 1")
        if not self.noise_sd > 0:
            raise ConfigInvalid("noise_sd must be positive")
        if self.mean_vector is not None:
            mv = np.asarray(self.mean_vector, float)
            if mv.shape != (self.p,):
                raise ConfigInvalid(f"mean_vector must have length p={self.p}")
        cov = self.cov_matrix()
        if cov.shape != (self.p, self.p) or not np.allclose(cov, cov.T):
            raise ConfigInvalid("covariance must be a symmetric p x p matrix")
        if np.linalg.eigvalsh(cov).min() < -1e-10 * max(1.0, np.abs(cov).max()):
            raise ConfigInvalid("covariance must be positive semidefinite")

    def mean(self) -> np.ndarray:
        if self.mean_vector is None:
            return np.zeros(self.p)
        return np.asarray(self.mean_vector, float)

    def cov_matrix(self) -> np.ndarray:
        if self.covariance is None:
            return ar1_covariance(self.p, self.ar_rho)
        return np.asarray(self.covariance, float).reshape(self.p, self.p)

    @property
    def n_censored_cols(self) -> int:
        # guard against 0.3 * 10 = 3.0000000000000004
        return int(math.ceil(round(self.frac_censored_cols * self.p, 9)))


@dataclass
class SimReport:
    config: SimConfig
    methods: tuple
    rows: list = field(default_factory=list)

    def metric(self, method: str, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows if r["method"] == method], dtype=float)

    def aggregate(self) -> dict:
        """Replicate mean of each metric per method; undefined correlations are skipped."""
        out = {}
        for meth in self.methods:
            agg = {}
            for name in METRICS:
                v = self.metric(meth, name)
                v = v[np.isfinite(v)]
                agg[name] = float(v.mean()) if v.size else float("nan")
            agg["failures"] = sum(1 for r in self.rows if r["method"] == meth and r["error"])
            out[meth] = agg
        return out

    def write_replicates_csv(self, path) -> None:
        cols = ["frac_censored_cols", "lod_quantile", "rep", "method", *METRICS, "error"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in cols])


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else format_float(v)
    return "" if v is None else str(v)


def generate_instance(cfg: SimConfig, rep_index: int):
    """Draw ``(theta_true, data, censored_mask)`` for one replicate."""
    rng = make_rng(cfg.seed, rep_index)
    n, p = cfg.n, cfg.p
    theta = rng.multivariate_normal(cfg.mean(), cfg.cov_matrix(), size=n, method="eigh")
    cen_cols = np.sort(rng.choice(p, size=cfg.n_censored_cols, replace=False))
    noisy = theta + cfg.noise_sd * rng.standard_normal((n, p))
    L = noisy.copy()
    R = noisy.copy()
    mask = np.zeros((n, p), dtype=bool)
    for j in cen_cols:
        col = theta[:, j]
        lod = np.quantile(col, cfg.lod_quantile)
        lb = col.min() - 6.0 * col.std(ddof=1)
        below = col < lod
        L[below, j] = lb
        R[below, j] = lod
        mask[below, j] = True
    data = validate(L, R, np.full((n, p), cfg.noise_sd))
    return theta, data, mask


def _select(est, truth, mask):
    est = np.asarray(est, float)
    truth = np.asarray(truth, float)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    if mask is None:
        return est.ravel(), truth.ravel()
    mask = np.asarray(mask, bool)
    if mask.shape != est.shape:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        raise ValueError("empty selection: mask selects no cells")
    return est[mask], truth[mask]


def rmse(est, truth, mask=None) -> float:
    a, b = _select(est, truth, mask)
    if a.size == 0:
        raise ValueError("empty selection")
    d = a - b
    return float(np.sqrt(np.mean(d * d)))


def spearman(est, truth, mask=None) -> float:
    """Spearman rank correlation with average ranks; ``nan`` if either side is constant."""
    a, b = _select(est, truth, mask)
    if a.size == 0:
        raise ValueError("empty selection")
    if a.size < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return float("nan")
    ra = rankdata(a) - (a.size + 1) / 2.0
    rb = rankdata(b) - (b.size + 1) / 2.0
    return float(np.clip((ra @ rb) / math.sqrt((ra @ ra) * (rb @ rb)), -1.0, 1.0))


def _npmle_posterior_mean(data, support, cfg):
    ll = loglik_matrix(data, support)
    prior, _ = fit_prior(ll, support, tol=cfg.tol, max_iter=cfg.max_iter, kkt=cfg.kkt)
    return posterior_mean(posterior_weights(ll, prior), support)


def _method_seed(cfg: SimConfig, rep_index: int) -> int:
    ss = np.random.SeedSequence([cfg.seed & (2**64 - 1), rep_index, 0x5EED])
    return int(ss.generate_state(1, np.uint64)[0])


def run_method(method: str, data: CensoredMatrix, cfg: SimConfig, rep_index: int = 0,
               theta_true=None) -> np.ndarray:
    """Estimate the mean matrix with one named method.

    ``theta_true`` is passed through only to the oracle methods.
    """
    if method not in METHODS:
        raise ConfigInvalid(f"unknown method {method!r}; choose from {METHODS}")
    if method in ORACLE_METHODS:
        if theta_true is None:
            raise ConfigInvalid(f"{method} needs the true means")
        if method == "OracleSupportPoints":
            return _npmle_posterior_mean(data, oracle_support(theta_true), cfg)
        return vectorized_eb(data, np.asarray(theta_true).ravel(), cfg.tol, cfg.max_iter, cfg.kkt)
    if method == "EBM-Tobit":
        ecfg = EbmTobitConfig(B=cfg.B, seed=_method_seed(cfg, rep_index), tol=cfg.tol,
                              max_iter=cfg.max_iter, kkt=cfg.kkt)
        return ebm_tobit(data, ecfg).theta_hat
    if method == "MidpointMLE":
        return fill_in(data, FillInRule.MIDPOINT_MLE)
    if method == "Half-Min":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FillInWarning)
            return fill_in(data, FillInRule.HALF_DETECTION_LIMIT)
    if method == "GeneralizedExemplarSupport":
        return _npmle_posterior_mean(data, exemplar_mle_support(data), cfg)
    # MeanFieldEB: independent per-column priors on each column's exemplar atoms
    ex = exemplar_mle_support(data).points
    return mean_field_eb(data, [ex[:, j] for j in range(data.p)], cfg.tol, cfg.max_iter, cfg.kkt)


def _run_replicate(args):
    cfg, methods, rep, keep_estimates = args
    theta, data, mask = generate_instance(cfg, rep)
    digest = data.digest()
    rows, estimates = [], {}
    for meth in methods:
        row = {
            "frac_censored_cols": cfg.frac_censored_cols,
            "lod_quantile": cfg.lod_quantile,
            "rep": rep,
            "method": meth,
            "error": "",
        }
        try:
            est = run_method(meth, data, cfg, rep, theta if meth in ORACLE_METHODS else None)
            if data.digest() != digest:
                raise RuntimeError("instance was modified by a method")
            has_cen = bool(mask.any())
            row["rmse_censored"] = rmse(est, theta, mask) if has_cen else float("nan")
            row["rmse_all"] = rmse(est, theta)
            row["spearman_censored"] = spearman(est, theta, mask) if has_cen else float("nan")
            row["spearman_all"] = spearman(est, theta)
            if keep_estimates:
                estimates[meth] = est
        except (EbTobitError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            for name in METRICS:
                row[name] = float("nan")
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows, (theta, mask, estimates) if keep_estimates else None


def run_experiment(cfg: SimConfig, methods=METHODS, *, threads: int = 1, estimates_dir=None) -> SimReport:
    """Run every replicate of ``cfg`` for each method and collect metrics.

    Per-method failures are recorded in the report rather than aborting.
    With ``estimates_dir`` the truth, mask and every estimate are written as
    CSV for audit.
    """
    methods = tuple(methods)
    for meth in methods:
        if meth not in METHODS:
            raise ConfigInvalid(f"unknown method {meth!r}; choose from {METHODS}")
    keep = estimates_dir is not None
    jobs = [(cfg, methods, rep, keep) for rep in range(cfg.reps)]
    if threads > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_run_replicate, jobs))
    else:
        results = [_run_replicate(j) for j in jobs]
    report = SimReport(cfg, methods)
    for rep, (rows, extra) in enumerate(results):
        report.rows.extend(rows)
        if keep:
            _write_estimates(estimates_dir, cfg, rep, *extra)
    return report


def _cell_tag(cfg: SimConfig) -> str:
    return f"frac{cfg.frac_censored_cols:g}_q{cfg.lod_quantile:g}"


def _write_estimates(root, cfg, rep, theta, mask, estimates):
    d = os.path.join(root, _cell_tag(cfg), f"rep{rep:04d}")
    os.makedirs(d, exist_ok=True)
    write_matrix_csv(os.path.join(d, "theta_true.csv"), theta)
    write_matrix_csv(os.path.join(d, "censored_mask.csv"), mask.astype(float))
    for meth, est in estimates.items():
        write_matrix_csv(os.path.join(d, f"{meth}.csv"), est)


def run_grid(base: SimConfig, fracs, quantiles, methods=METHODS, *, threads: int = 1,
             estimates_dir=None) -> list[SimReport]:
    """One :class:`SimReport` per ``(frac, quantile)`` cell, fracs outer."""
    return [
        run_experiment(replace(base, frac_censored_cols=f, lod_quantile=q), methods,
                       threads=threads, estimates_dir=estimates_dir)
        for f in fracs
        for q in quantiles
    ]


def write_grid_tables(reports: list[SimReport], out_dir) -> list[str]:
    """Write one replicate CSV plus one method x (frac, quantile) table per metric."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    rep_path = os.path.join(out_dir, "replicates.csv")
    with open(rep_path, "w", newline="", encoding="utf-8") as fh:
        cols = ["frac_censored_cols", "lod_quantile", "rep", "method", *METRICS, "error"]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for rep in reports:
            for r in rep.rows:
                w.writerow([_fmt(r[c]) for c in cols])
    paths.append(rep_path)
    methods = reports[0].methods
    aggs = [r.aggregate() for r in reports]
    header = ["method"] + [
        f"frac={r.config.frac_censored_cols:g};q={r.config.lod_quantile:g}" for r in reports
    ]
    for name in METRICS:
        path = os.path.join(out_dir, f"table_{name}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for meth in methods:
                w.writerow([meth] + [_fmt(a[meth][name]) for a in aggs])
        paths.append(path)
    return paths


def config_fields() -> list[str]:
    return [f.name for f in fields(SimConfig)]


def circle_demo(n: int = 500, radii=(2.0, 6.0), seed: int = 0, tol: float = 1e-8,
                max_iter: int = 10000, kkt: bool = False) -> dict:
    """Joint 2-D prior versus two independent 1-D priors on a two-circle prior.

    True means are uniform on one of two concentric circles (each chosen with
    probability 1/2), observed with unit Gaussian noise. Both estimators use
    the observations as atoms. ``kkt`` is passed to every weight fit; as in
    the bench it is off by default because the dense 1-D fits certify slowly.
    """
    if n < 10:
        raise ConfigInvalid("circle demo needs n >= 10")
    r1, r2 = (float(r) for r in radii)
    if not (r1 > 0 and r2 > 0):
        raise ConfigInvalid("radii must be positive")
    rng = make_rng(seed, 0xC1C)
    radius = np.where(rng.random(n) < 0.5, r1, r2)
    angle = rng.uniform(0.0, 2.0 * np.pi, n)
    theta = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    obs = theta + rng.standard_normal((n, 2))
    data = validate(obs, obs)

    support = exemplar_mle_support(data)
    ll = loglik_matrix(data, support)
    prior, diag = fit_prior(ll, support, tol=tol, max_iter=max_iter, kkt=kkt)
    joint = posterior_mean(posterior_weights(ll, prior), support)
    mf = mean_field_eb(data, [obs[:, 0], obs[:, 1]], tol, max_iter, kkt)
    return {
        "n": n,
        "radii": (r1, r2),
        "seed": seed,
        "truth": theta,
        "observed": obs,
        "joint": joint,
        "mean_field": mf,
        "rmse_joint": rmse(joint, theta),
        "rmse_mean_field": rmse(mf, theta),
        "rmse_observed": rmse(obs, theta),
        "joint_converged": diag.converged,
    }


def write_circle_demo(result: dict, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for key in ("truth", "observed", "joint", "mean_field"):
        path = os.path.join(out_dir, f"circle_{key}.csv")
        write_matrix_csv(path, result[key], header=["x", "y"])
        paths.append(path)
    summary = os.path.join(out_dir, "circle_summary.csv")
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "rmse"])
        for key in ("observed", "joint", "mean_field"):
            w.writerow([key, format_float(result[f"rmse_{key}"])])
    paths.append(summary)
    return paths
