import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebmtobit import (
    CellKind,
    CensoredMatrix,
    DimensionMismatch,
    EmptyMatrix,
    EndpointOrderViolation,
    NonpositiveSigma,
    ParseError,
    UnboundedCell,
    format_float,
    read_csv_pair,
    read_matrix_csv,
    validate,
    write_csv_pair,
)


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_point_cell_defaults_sigma_to_one():
    d = validate([[0.5]], [[0.5]])
    assert d.shape == (1, 1)
    assert d.kind(0, 0) is CellKind.POINT
    assert d.sigma.tolist() == [[1.0]]


def test_reversed_endpoints_rejected():
    with pytest.raises(EndpointOrderViolation):
        validate([[1.0]], [[0.0]])


def test_left_censored_cell_is_interval():
    d = validate([[-np.inf]], [[2.3]])
    assert d.kind(0, 0) is CellKind.INTERVAL
    assert d.censored_mask.tolist() == [[True]]


@pytest.mark.parametrize(
    "L,R,exc",
    [
        ([[np.inf]], [[np.inf]], UnboundedCell),
        ([[-np.inf]], [[-np.inf]], UnboundedCell),
        ([[np.nan]], [[1.0]], ValueError),
        ([[0.0, 1.0]], [[0.0]], DimensionMismatch),
        (np.empty((0, 2)), np.empty((0, 2)), EmptyMatrix),
    ],
)
def test_invalid_inputs(L, R, exc):
    with pytest.raises(exc):
        validate(L, R)


def test_sigma_checked():
    with pytest.raises(NonpositiveSigma):
        validate([[0.0]], [[0.0]], [[0.0]])
    d = validate([[0.0, 1.0]], [[0.0, 2.0]], 0.5)
    assert d.sigma.tolist() == [[0.5, 0.5]]


def test_fully_unbounded_cell_allowed():
    d = validate([[-np.inf]], [[np.inf]])
    assert d.kind(0, 0) is CellKind.INTERVAL


def test_arrays_are_read_only_and_inputs_untouched():
    L = np.array([[0.0, -np.inf]])
    R = np.array([[0.0, 1.0]])
    d = validate(L, R)
    with pytest.raises(ValueError):
        d.L[0, 0] = 3.0
    L[0, 0] = 9.0
    assert d.L[0, 0] == 0.0


def test_read_pair_example(tmp_path):
    pl = _write(tmp_path / "L.csv", "0,0\n-inf,1.5\n")
    pr = _write(tmp_path / "R.csv", "0,0\n0.5,1.5\n")
    d = read_csv_pair(pl, pr)
    assert d.shape == (2, 2)
    assert d.kind(0, 0) is CellKind.POINT and d.kind(0, 1) is CellKind.POINT
    assert d.kind(1, 0) is CellKind.INTERVAL and d.L[1, 0] == -np.inf and d.R[1, 0] == 0.5
    assert d.kind(1, 1) is CellKind.POINT


def test_read_pair_column_mismatch(tmp_path):
    pl = _write(tmp_path / "L.csv", "0,0,0\n")
    pr = _write(tmp_path / "R.csv", "0,0\n")
    with pytest.raises(DimensionMismatch):
        read_csv_pair(pl, pr)


@pytest.mark.parametrize("token", ["NaN", "nan", "", "abc"])
def test_bad_token_is_parse_error(tmp_path, token):
    p = _write(tmp_path / "L.csv", f"0,1\n2,{token}\n")
    with pytest.raises(ParseError) as info:
        read_matrix_csv(p)
    assert info.value.row == 2


def test_header_and_infinity_spellings(tmp_path):
    p = _write(tmp_path / "M.csv", "a,b\n-Inf,+inf\n1e-3,INF\n")
    M = read_matrix_csv(p)
    assert M.shape == (2, 2)
    assert M[0, 0] == -np.inf and M[0, 1] == np.inf and M[1, 0] == 1e-3


def test_missing_file_is_dimension_mismatch(tmp_path):
    pl = _write(tmp_path / "L.csv", "0\n")
    with pytest.raises(DimensionMismatch):
        read_csv_pair(pl, str(tmp_path / "nope.csv"))


def test_format_float_roundtrips():
    for x in [0.1, 1 / 3, -2.5e-300, 1e308, math.pi]:
        assert float(format_float(x)) == x
    assert format_float(np.inf) == "inf" and format_float(-np.inf) == "-inf"


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(finite, st.floats(0, 1e3), st.integers(0, 3)), min_size=1, max_size=12),
       st.integers(1, 3))
def test_csv_roundtrip(tmp_path_factory, cells, p):
    cells = (cells * p)[: max(p, len(cells) - len(cells) % p)]
    n = len(cells) // p
    L = np.empty((n, p))
    R = np.empty((n, p))
    for k, (x, w, kind) in enumerate(cells[: n * p]):
        i, j = divmod(k, p)
        L[i, j], R[i, j] = [(x, x), (x, x + w + 1e-3), (-np.inf, x), (x, np.inf)][kind]
    d = validate(L, R, np.full((n, p), 0.7))
    base = tmp_path_factory.mktemp("csv")
    write_csv_pair(d, base / "L.csv", base / "R.csv", base / "S.csv")
    back = read_csv_pair(base / "L.csv", base / "R.csv", base / "S.csv")
    assert back == d and back.digest() == d.digest()


def test_equality_and_hash():
    a = validate([[0.0, -np.inf]], [[0.0, 1.0]])
    b = validate(np.array([[0.0, -np.inf]]), np.array([[0.0, 1.0]]), 1.0)
    assert a == b and hash(a) == hash(b)
    assert isinstance(a, CensoredMatrix)
    assert a.flatten().shape == (2, 1)
