"""Command-line front end: ``fit``, ``impute``, ``simulate``, ``demo``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines (``#`` starts a comment), then command-line flags.
Every run writes ``provenance.txt`` in the same format, so
``--config out/provenance.txt`` replays it.

Exit codes: 0 success, 1 validation or solve failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace

import numpy as np
from scipy.special import logsumexp

from . import __version__
from .censored_data import format_float, read_csv_pair, read_matrix_csv, write_matrix_csv
from .errors import ConfigInvalid, EbTobitError
from .npmle import DiscretePrior, fit_prior
from .posterior import posterior_mean, posterior_variance, posterior_weights
from .simbench import METHODS, SimConfig, circle_demo, run_grid, write_circle_demo, write_grid_tables
from .support import EbmTobitConfig, ebm_tobit, exemplar_mle_support, grid_support
from .tobit_kernel import SupportSet, loglik_matrix


class UsageError(Exception):
    pass


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in {"1", "true", "yes", "on"}:
        return True
    if v in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in str(s).replace(";", ",").split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in str(s).replace(";", ",").split(",") if x.strip())


def _strs(s):
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


def _opt_int(s):
    return None if str(s).strip().lower() in {"", "none", "auto"} else int(s)


def _opt_str(s):
    return None if str(s).strip().lower() in {"", "none"} else str(s).strip()


def _show(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, tuple):
        return ",".join(_show(x) for x in v)
    return str(v)


_THREADS = ("threads", int, None, "worker processes (default: available cores)")

# (key, type, default, help) per command
_OPTIONS = {
    "fit": [
        ("L", _opt_str, None, "CSV of lower endpoints"),
        ("R", _opt_str, None, "CSV of upper endpoints"),
        ("sigma", _opt_str, None, "optional CSV of noise standard deviations"),
        ("out", str, "fit_out", "output directory"),
        ("support", str, "ebm-tobit", "ebm-tobit | exemplar | grid"),
        ("grid_points", int, 30, "points per axis for grid support"),
        ("B", int, 50, "EBM-Tobit iterations"),
        ("burn_in", int, 0, "leading iterations left out of the average"),
        ("m", _opt_int, None, "atoms drawn per iteration (default: n)"),
        ("noise_mode", str, "homoskedastic", "homoskedastic | column_mean"),
        ("noise_sd", float, 1.0, "jitter sd for homoskedastic mode"),
        ("seed", int, 0, "random seed"),
        ("tol", float, 1e-8, "solver tolerance"),
        ("max_iter", int, 10000, "solver iteration cap"),
        ("kkt", _bool, True, "require the KKT certificate for convergence"),
        _THREADS,
    ],
    "impute": [
        ("prior", _opt_str, None, "directory written by fit"),
        ("L", _opt_str, None, "CSV of lower endpoints for new rows"),
        ("R", _opt_str, None, "CSV of upper endpoints for new rows"),
        ("sigma", _opt_str, None, "optional CSV of noise standard deviations"),
        ("out", str, "imputed.csv", "output CSV"),
        _THREADS,
    ],
    "simulate": [
        ("out", str, "sim_out", "output directory"),
        ("n", int, 1000, "rows per replicate"),
        ("p", int, 25, "columns"),
        ("fracs", _floats, (0.3,), "fractions of censored columns (grid)"),
        ("quantiles", _floats, (0.1,), "detection-limit quantiles (grid)"),
        ("reps", int, 200, "replicates per grid cell"),
        ("noise_sd", float, 1.0, "observation noise sd"),
        ("ar_rho", float, 0.7, "AR(1) correlation of the default covariance"),
        ("mean_csv", _opt_str, None, "CSV (one row) with the mean vector"),
        ("cov_csv", _opt_str, None, "CSV with the p x p covariance"),
        ("methods", _strs, METHODS, "comma-separated method names"),
        ("B", int, 50, "EBM-Tobit iterations"),
        ("seed", int, 0, "random seed"),
        ("tol", float, 1e-8, "solver tolerance"),
        ("max_iter", int, 10000, "solver iteration cap"),
        ("kkt", _bool, False, "require the KKT certificate in every fit"),
        ("save_estimates", _bool, False, "write per-replicate estimate matrices"),
        _THREADS,
    ],
    "demo": [
        ("out", str, "demo_out", "output directory"),
        ("n", int, 500, "number of points"),
        ("radii", _floats, (2.0, 6.0), "two circle radii"),
        ("seeds", _ints, (0,), "comma-separated seeds"),
        ("tol", float, 1e-8, "solver tolerance"),
        ("max_iter", int, 10000, "solver iteration cap"),
        ("kkt", _bool, False, "require the KKT certificate in every fit"),
        _THREADS,
    ],
}


def read_config(path) -> dict:
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _build_parser():
    parser = argparse.ArgumentParser(prog="ebmtobit", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in _OPTIONS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="key = value settings file")
        for key, _typ, default, helptext in opts:
            flag = "--" + key.replace("_", "-")
            # raw strings here; conversion happens once defaults/config/flags are merged
            sp.add_argument(flag, dest=key, default=None, help=f"{helptext} [default: {_show(default)}]")
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags into typed settings."""
    opts = _OPTIONS[command]
    known = {k for k, *_ in opts}
    raw = {}
    if getattr(args, "config", None):
        file_cfg = read_config(args.config)
        file_cfg.pop("command", None)
        file_cfg.pop("version", None)
        unknown = set(file_cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        raw.update(file_cfg)
    for k in known:
        v = getattr(args, k, None)
        if v is not None:
            raw[k] = v
    out = {}
    for key, typ, default, _ in opts:
        if key in raw:
            try:
                out[key] = typ(raw[key])
            except ValueError as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            out[key] = default
    if out.get("threads") is None:
        out["threads"] = os.cpu_count() or 1
    if out["threads"] < 1:
        raise UsageError("threads must be >= 1")
    return out


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_provenance(out_dir, command, settings, inputs=()):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "provenance.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# ebmtobit {__version__}; replay with: ebmtobit {command} --config {path}\n")
        fh.write(f"command = {command}\n")
        for key, *_ in _OPTIONS[command]:
            fh.write(f"{key} = {_show(settings[key])}\n")
        for p in inputs:
            if p:
                fh.write(f"# input {p} sha256={_sha256(p)}\n")
    return path


def _require(settings, *keys):
    missing = [k for k in keys if not settings.get(k)]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(missing))


def cmd_fit(s) -> int:
    _require(s, "L", "R")
    data = read_csv_pair(s["L"], s["R"], s["sigma"])
    out = s["out"]
    os.makedirs(out, exist_ok=True)
    kind = s["support"].lower()
    diag_rows = []
    if kind == "ebm-tobit":
        cfg = EbmTobitConfig(B=s["B"], burn_in=s["burn_in"], m=s["m"], noise_mode=s["noise_mode"],
                             noise_sd=s["noise_sd"], seed=s["seed"], tol=s["tol"],
                             max_iter=s["max_iter"], kkt=s["kkt"])
        res = ebm_tobit(data, cfg)
        prior = res.final_prior
        theta_hat = res.theta_hat
        diag_rows = [(i + 1, d) for i, d in enumerate(res.diagnostics)]
    elif kind in ("exemplar", "grid"):
        support = exemplar_mle_support(data) if kind == "exemplar" else grid_support(data, s["grid_points"])
        ll = loglik_matrix(data, support)
        prior, d = fit_prior(ll, support, tol=s["tol"], max_iter=s["max_iter"], kkt=s["kkt"])
        theta_hat = None
        diag_rows = [(1, d)]
    else:
        raise UsageError(f"unknown support {s['support']!r}; use ebm-tobit, exemplar or grid")

    ll = loglik_matrix(data, prior.support)
    W = posterior_weights(ll, prior)
    mean = posterior_mean(W, prior.support)
    if theta_hat is None:
        theta_hat = mean
    write_matrix_csv(os.path.join(out, "prior_support.csv"), prior.support.points)
    write_matrix_csv(os.path.join(out, "prior_weights.csv"), prior.weights[:, None])
    write_matrix_csv(os.path.join(out, "theta_hat.csv"), theta_hat)
    write_matrix_csv(os.path.join(out, "posterior_mean.csv"), mean)
    write_matrix_csv(os.path.join(out, "posterior_variance.csv"), posterior_variance(W, prior.support))
    with open(os.path.join(out, "diagnostics.csv"), "w", encoding="utf-8") as fh:
        fh.write("iteration,final_loglik,solver_iterations,converged,max_residual\n")
        for i, d in diag_rows:
            fh.write(f"{i},{format_float(d.final_loglik)},{d.iterations},{int(d.converged)},"
                     f"{format_float(d.max_residual)}\n")
    write_provenance(out, "fit", s, (s["L"], s["R"], s["sigma"]))
    if not all(d.converged for _, d in diag_rows):
        print("warning: some weight fits hit max_iter; see diagnostics.csv", file=sys.stderr)
    return 0


def load_prior(prior_dir) -> DiscretePrior:
    pts = read_matrix_csv(os.path.join(prior_dir, "prior_support.csv"))
    w = read_matrix_csv(os.path.join(prior_dir, "prior_weights.csv")).ravel()
    return DiscretePrior(SupportSet(pts), w)


def cmd_impute(s) -> int:
    _require(s, "prior", "L", "R")
    prior = load_prior(s["prior"])
    data = read_csv_pair(s["L"], s["R"], s["sigma"])
    if data.p != prior.p:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"new rows have p={data.p}, prior has p={prior.p}")
    V = loglik_matrix(data, prior.support, check=False).values
    with np.errstate(divide="ignore"):
        A = V + np.log(prior.weights)[None, :]
    lse = logsumexp(A, axis=1)
    bad = ~np.isfinite(lse)
    out_dir = os.path.dirname(os.path.abspath(s["out"]))
    os.makedirs(out_dir, exist_ok=True)
    p = prior.p
    with open(s["out"], "w", encoding="utf-8") as fh:
        fh.write(",".join([f"mean_{j + 1}" for j in range(p)] + [f"var_{j + 1}" for j in range(p)]) + "\n")
        for i in range(data.n):
            if bad[i]:
                fh.write(",".join([""] * (2 * p)) + "\n")
                print(f"error [posterior]: row {i + 1}: ZeroMarginalRow", file=sys.stderr)
                continue
            Wi = np.exp(A[i] - lse[i])[None, :]
            mean = posterior_mean(Wi, prior.support)[0]
            var = posterior_variance(Wi, prior.support)[0]
            fh.write(",".join(format_float(v) for v in np.concatenate([mean, var])) + "\n")
    write_provenance(out_dir, "impute", s, (s["L"], s["R"], s["sigma"]))
    return 1 if bad.any() else 0


def cmd_simulate(s) -> int:
    mean = cov = None
    if s["mean_csv"]:
        mean = tuple(read_matrix_csv(s["mean_csv"]).ravel())
    if s["cov_csv"]:
        cov = tuple(read_matrix_csv(s["cov_csv"]).ravel())
    for m in s["methods"]:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    base = SimConfig(n=s["n"], p=s["p"], frac_censored_cols=s["fracs"][0], lod_quantile=s["quantiles"][0],
                     reps=s["reps"], noise_sd=s["noise_sd"], mean_vector=mean, covariance=cov,
                     ar_rho=s["ar_rho"], seed=s["seed"], B=s["B"], tol=s["tol"], max_iter=s["max_iter"],
                     kkt=s["kkt"])
    for f in s["fracs"]:
        for q in s["quantiles"]:
            replace(base, frac_censored_cols=f, lod_quantile=q)  # validates every grid cell up front
    est_dir = os.path.join(s["out"], "estimates") if s["save_estimates"] else None
    reports = run_grid(base, s["fracs"], s["quantiles"], s["methods"], threads=s["threads"],
                       estimates_dir=est_dir)
    write_grid_tables(reports, s["out"])
    write_provenance(s["out"], "simulate", s, (s["mean_csv"], s["cov_csv"]))
    for r in reports:
        for meth, agg in r.aggregate().items():
            if agg["failures"]:
                print(f"warning: {meth} failed in {agg['failures']} replicate(s) at "
                      f"frac={r.config.frac_censored_cols:g}, q={r.config.lod_quantile:g}", file=sys.stderr)
    return 0


def cmd_demo(s) -> int:
    if len(s["radii"]) != 2:
        raise UsageError("radii needs exactly two values")
    rows = []
    for seed in s["seeds"]:
        res = circle_demo(s["n"], s["radii"], seed, s["tol"], s["max_iter"], s["kkt"])
        write_circle_demo(res, os.path.join(s["out"], f"seed_{seed}"))
        rows.append((seed, res["rmse_observed"], res["rmse_joint"], res["rmse_mean_field"]))
    os.makedirs(s["out"], exist_ok=True)
    with open(os.path.join(s["out"], "demo_summary.csv"), "w", encoding="utf-8") as fh:
        fh.write("seed,rmse_observed,rmse_joint,rmse_mean_field\n")
        for seed, *vals in rows:
            fh.write(f"{seed}," + ",".join(format_float(v) for v in vals) + "\n")
    write_provenance(s["out"], "demo", s)
    return 0


_COMMANDS = {"fit": cmd_fit, "impute": cmd_impute, "simulate": cmd_simulate, "demo": cmd_demo}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve(args.command, args)
        return _COMMANDS[args.command](settings)
    except (UsageError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigInvalid as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    except EbTobitError as exc:
        print(f"error [{exc.stage}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
