"""Partly interval-censored observation matrices.

A :class:`CensoredMatrix` stores, for every cell ``(i, j)``, an interval
``[L_ij, R_ij]`` and a noise scale ``sigma_ij``. ``L == R`` marks a direct
(noisy) point measurement; ``L < R`` marks an interval-censored cell, with
``-inf``/``inf`` endpoints for left/right censoring.

CSV layout: UTF-8, comma separated, one matrix per file, optional single
header row, infinities written as ``-inf``/``inf`` (case-insensitive on read).
Missing-value tokens (``NaN``, empty fields, ``NA``) are rejected; censoring
must be given explicitly as an interval.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMatrix,
    EndpointOrderViolation,
    NonpositiveSigma,
    ParseError,
    UnboundedCell,
)

__all__ = [
    "CellKind",
    "CensoredMatrix",
    "validate",
    "read_csv_pair",
    "write_csv_pair",
    "read_matrix_csv",
    "write_matrix_csv",
    "format_float",
]


class CellKind(enum.Enum):
    POINT = "point"
    INTERVAL = "interval"


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CensoredMatrix:
    """Validated ``(L, R, sigma)`` triple; construct through :func:`validate`."""

    L: np.ndarray
    R: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def p(self) -> int:
        return self.L.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.L.shape

    @property
    def point_mask(self) -> np.ndarray:
        return self.L == self.R

    @property
    def censored_mask(self) -> np.ndarray:
        return self.L < self.R

    def kind(self, i: int, j: int) -> CellKind:
        return CellKind.POINT if self.L[i, j] == self.R[i, j] else CellKind.INTERVAL

    def row(self, i: int) -> "CensoredMatrix":
        return CensoredMatrix(
            _frozen(self.L[i : i + 1]), _frozen(self.R[i : i + 1]), _frozen(self.sigma[i : i + 1])
        )

    def rows(self, idx) -> "CensoredMatrix":
        idx = np.atleast_1d(np.asarray(idx))
        return CensoredMatrix(_frozen(self.L[idx]), _frozen(self.R[idx]), _frozen(self.sigma[idx]))

    def column(self, j: int) -> "CensoredMatrix":
        sl = (slice(None), slice(j, j + 1))
        return CensoredMatrix(_frozen(self.L[sl]), _frozen(self.R[sl]), _frozen(self.sigma[sl]))

    def flatten(self) -> "CensoredMatrix":
        """All ``n*p`` cells as a single-column matrix, row-major order."""
        return CensoredMatrix(
            _frozen(self.L.reshape(-1, 1)),
            _frozen(self.R.reshape(-1, 1)),
            _frozen(self.sigma.reshape(-1, 1)),
        )

    def __eq__(self, other):
        if not isinstance(other, CensoredMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.L, other.L)
            and np.array_equal(self.R, other.R)
            and np.array_equal(self.sigma, other.sigma)
        )

    def __hash__(self):
        return hash((self.shape, self.L.tobytes(), self.R.tobytes(), self.sigma.tobytes()))

    def digest(self) -> str:
        """Content hash used to check that methods share one instance."""
        import hashlib

        h = hashlib.sha256()
        for a in (self.L, self.R, self.sigma):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(repr(self.shape).encode())
        return h.hexdigest()


def validate(raw_L, raw_R, raw_sigma=None) -> CensoredMatrix:
    """Check the endpoint and scale invariants and return a :class:`CensoredMatrix`.

    ``raw_sigma`` may be ``None`` (all ones), a scalar (broadcast), or a matrix
    of the same shape as ``raw_L``. One-dimensional input is read as a single
    row. Passing an existing :class:`CensoredMatrix` returns an equal object.
    """
    if isinstance(raw_L, CensoredMatrix):
        raw_L, raw_R, raw_sigma = raw_L.L, raw_L.R, raw_L.sigma
    L = np.array(raw_L, dtype=float)
    R = np.array(raw_R, dtype=float)
    if L.ndim == 1:
        L = L[None, :]
    if R.ndim == 1:
        R = R[None, :]
    if L.ndim != 2 or R.ndim != 2:
        raise DimensionMismatch(f"L and R must be matrices, got ndim {L.ndim} and {R.ndim}")
    if L.shape != R.shape:
        raise DimensionMismatch(f"L has shape {L.shape} but R has shape {R.shape}")
    if L.size == 0:
        raise EmptyMatrix(f"matrix has shape {L.shape}; need n >= 1 and p >= 1")

    if raw_sigma is None:
        sigma = np.ones_like(L)
    else:
        sigma = np.array(raw_sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = np.full_like(L, float(sigma))
        elif sigma.ndim == 1 and L.shape[0] == 1:
            sigma = sigma[None, :]
        if sigma.shape != L.shape:
            raise DimensionMismatch(f"sigma has shape {sigma.shape} but L has shape {L.shape}")

    if np.isnan(L).any() or np.isnan(R).any():
        bad = np.argwhere(np.isnan(L) | np.isnan(R))[0]
        raise UnboundedCell(f"NaN endpoint at cell {tuple(int(v) for v in bad)}")
    if not (np.isfinite(sigma).all() and (sigma > 0).all()):
        bad = np.argwhere(~(np.isfinite(sigma) & (sigma > 0)))[0]
        raise NonpositiveSigma(
            f"sigma must be positive and finite; cell {tuple(int(v) for v in bad)} "
            f"has {sigma[tuple(bad)]!r}"
        )
    if (L > R).any():
        bad = np.argwhere(L > R)[0]
        i, j = (int(v) for v in bad)
        raise EndpointOrderViolation(f"L > R at cell ({i}, {j}): {L[i, j]!r} > {R[i, j]!r}")
    same_sign_inf = (np.isposinf(L) & np.isposinf(R)) | (np.isneginf(L) & np.isneginf(R))
    if same_sign_inf.any():
        bad = np.argwhere(same_sign_inf)[0]
        raise UnboundedCell(f"point cell at an infinite value at {tuple(int(v) for v in bad)}")
    if np.isposinf(L).any() or np.isneginf(R).any():
        bad = np.argwhere(np.isposinf(L) | np.isneginf(R))[0]
        raise UnboundedCell(f"lower endpoint +inf or upper endpoint -inf at {tuple(int(v) for v in bad)}")

    return CensoredMatrix(_frozen(L), _frozen(R), _frozen(sigma))


_INF_TOKENS = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}


def _parse_token(tok: str) -> float:
    t = tok.strip()
    low = t.lower()
    if low in _INF_TOKENS:
        return _INF_TOKENS[low]
    # float() also accepts "nan", "infinity" and friends; only plain decimals are allowed
    if not t or any(c.isalpha() and c not in "eE" for c in t):
        raise ValueError(t)
    return float(t)


def _looks_numeric(tok: str) -> bool:
    try:
        _parse_token(tok)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> np.ndarray:
    """Parse one matrix file; the first line is a header iff none of its fields is numeric."""
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if rows and not any(_looks_numeric(c) for c in rows[0]):
        rows = rows[1:]
        first_line = 2
    else:
        first_line = 1
    if not rows:
        raise EmptyMatrix(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for r, fields in enumerate(rows):
        if len(fields) != width:
            raise DimensionMismatch(
                f"{path}: row {r + first_line} has {len(fields)} fields, expected {width}"
            )
        for c, tok in enumerate(fields):
            try:
                out[r, c] = _parse_token(tok)
            except ValueError:
                raise ParseError(path, r + first_line, c + 1, tok) from None
    return out


def read_csv_pair(path_L, path_R, path_sigma=None) -> CensoredMatrix:
    """Read lower/upper endpoint files (and optional sigma file) and validate them."""
    for p in (path_L, path_R, path_sigma):
        if p is not None and not os.path.exists(p):
            raise DimensionMismatch(f"input file not found: {p}")
    L = read_matrix_csv(path_L)
    R = read_matrix_csv(path_R)
    sigma = read_matrix_csv(path_sigma) if path_sigma is not None else None
    return validate(L, R, sigma)


def format_float(x: float) -> str:
    """17 significant digits, so text output round-trips to the same double."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def write_matrix_csv(path, M, header=None) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in M:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def write_csv_pair(data: CensoredMatrix, path_L, path_R, path_sigma=None) -> None:
    write_matrix_csv(path_L, data.L)
    write_matrix_csv(path_R, data.R)
    if path_sigma is not None:
        write_matrix_csv(path_sigma, data.sigma)
