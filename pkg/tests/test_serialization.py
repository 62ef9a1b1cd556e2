"""JSON matrix interchange and CSV table round-trips."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twrc.errors import ParseError
from twrc.linalg import joint_decompose
from twrc.rates import PowerConfig, TwrcInstance
from twrc.serialization import (
    format_float,
    load_channel,
    load_matrix,
    matrix_to_obj,
    obj_to_matrix,
    read_csv,
    read_region_csv,
    read_sweep_csv,
    save_channel,
    save_decomposition,
    save_matrix,
    write_csv,
)

from conftest import cplx

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=200)
@given(finite)
def test_float_format_round_trips_exactly(x):
    assert float(format_float(x)) == x or (x == 0.0 and float(format_float(x)) == 0.0)


def test_float_format_has_no_excess_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(1.0) == "1"
    assert float(format_float(-2.5e-300)) == -2.5e-300


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    rows=st.integers(1, 4),
    cols=st.integers(1, 4),
    scale=st.sampled_from([1.0, 1e-200, 1e200]),
)
def test_matrix_round_trip_is_bit_identical(seed, rows, cols, scale):
    rng = np.random.default_rng(seed)
    M = cplx(rng, rows, cols) * scale
    back = obj_to_matrix(matrix_to_obj(M))
    assert back.dtype == np.complex128
    assert np.array_equal(back, M)


def test_matrix_files_round_trip(tmp_path, rng):
    M = cplx(rng, 3, 2)
    path = tmp_path / "m.json"
    save_matrix(path, M)
    assert np.array_equal(load_matrix(path), M)


def test_matrix_object_layout(rng):
    obj = matrix_to_obj(np.array([[1.5 - 2.0j]]))
    assert obj == {"rows": 1, "cols": 1, "re": [1.5], "im": [-2.0]}


def test_matrix_to_obj_rejects_bad_values():
    with pytest.raises(ValueError):
        matrix_to_obj(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        matrix_to_obj(np.array([[np.inf + 0j]]))
    with pytest.raises(ValueError):
        matrix_to_obj(np.zeros(3))


def test_obj_to_matrix_error_paths():
    good = {"rows": 1, "cols": 2, "re": [1.0, 2.0], "im": [0.0, 0.0]}
    assert obj_to_matrix(good).shape == (1, 2)
    cases = [
        ({k: v for k, v in good.items() if k != "im"}, "im"),
        ({**good, "re": [1.0]}, "re"),
        ({**good, "re": [1.0, "x"]}, "re"),
        ({**good, "im": [0.0, float("nan")]}, "im"),
        ({**good, "im": [0.0, True]}, "im"),
        ({**good, "rows": "1"}, "rows"),
    ]
    for obj, key in cases:
        with pytest.raises(ParseError, match=key):
            obj_to_matrix(obj, field="matrix")


def test_load_matrix_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"rows": 1,\n  broken')
    with pytest.raises(ParseError, match=r"bad\.json:2:"):
        load_matrix(path)
    with pytest.raises(ParseError):
        load_matrix(tmp_path / "absent.json")


def test_channel_round_trip(tmp_path, rng):
    ch = TwrcInstance(
        cplx(rng, 3, 2), cplx(rng, 3, 2), cplx(rng, 2, 3), cplx(rng, 2, 3),
        PowerConfig(2.0, 3.0, 4.0, 0.5),
    )
    path = tmp_path / "ch.json"
    save_channel(path, ch)
    back = load_channel(path)
    for name in ("H_AR", "H_BR", "H_RA", "H_RB"):
        assert np.array_equal(getattr(back, name), getattr(ch, name))
    assert back.power == ch.power


def test_channel_defaults_reciprocal_downlink(tmp_path, rng):
    obj = {
        "H_AR": matrix_to_obj(cplx(rng, 3, 1)),
        "H_BR": matrix_to_obj(cplx(rng, 3, 2)),
    }
    path = tmp_path / "ch.json"
    path.write_text(json.dumps(obj))
    ch = load_channel(path)
    assert np.array_equal(ch.H_RA, ch.H_AR.T)
    assert np.array_equal(ch.H_RB, ch.H_BR.T)
    assert ch.power == PowerConfig(1.0, 1.0, 1.0, 1.0)


def test_channel_power_errors_become_parse_errors(tmp_path, rng):
    obj = {
        "H_AR": matrix_to_obj(cplx(rng, 2, 1)),
        "H_BR": matrix_to_obj(cplx(rng, 2, 1)),
        "P_A": -3.0,
    }
    path = tmp_path / "ch.json"
    path.write_text(json.dumps(obj))
    with pytest.raises(ParseError):
        load_channel(path)


def test_decomposition_file_contains_all_blocks(tmp_path, rng):
    jd = joint_decompose(cplx(rng, 4, 2), cplx(rng, 4, 2))
    path = tmp_path / "jd.json"
    save_decomposition(path, jd)
    obj = json.loads(path.read_text())
    assert sorted(obj) == ["D_A", "D_B", "G_A", "G_B", "U", "d_A", "d_B", "k", "l", "lambdas"]
    assert obj["k"] == jd.k and obj["l"] == jd.l
    assert np.array_equal(obj_to_matrix(obj["U"], field="U"), jd.U)
    lams = [float(v) for v in obj["lambdas"]]
    assert lams == [float(v) for v in jd.lambdas]


def test_csv_round_trip_and_layout(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ("a", "b"), [("x", "1.5"), ("y", "2")])
    assert path.read_bytes() == b"a,b\nx,1.5\ny,2\n"
    cols, rows = read_csv(path)
    assert cols == ("a", "b")
    assert rows == [("x", "1.5"), ("y", "2")]


def test_sweep_csv_typed_round_trip(tmp_path):
    path = tmp_path / "s.csv"
    rows = [
        ("sd", "10", "2", "2", "4", "3.1400000000000001", "0.02", "100", "7"),
        ("upper_bound", "10", "2", "2", "4", "3.5", "0", "100", "7"),
    ]
    write_csv(
        path,
        ("scheme", "snr_db", "n_a", "n_b", "n_r", "mean_sum_rate", "stderr", "trials", "seed"),
        rows,
    )
    parsed = read_sweep_csv(path)
    assert parsed[0] == ("sd", 10.0, 2, 2, 4, 3.14, 0.02, 100, 7)
    assert isinstance(parsed[0][2], int)
    assert parsed[1][6] == 0.0


def test_region_csv_schema_enforced(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, ("r_a", "r_b", "scheme"), [("1.0", "2.0", "sd")])
    parsed = read_region_csv(path)
    assert parsed == [(1.0, 2.0, "sd")]
    bad = tmp_path / "bad.csv"
    write_csv(bad, ("r_a", "scheme"), [("1.0", "sd")])
    with pytest.raises(ParseError):
        read_region_csv(bad)


def test_csv_cell_errors_name_the_line(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text(
        "r_a,r_b,scheme\n1.0,2.0,sd\noops,2.0,sd\n"
    )
    with pytest.raises(ParseError, match=r"s\.csv:3.*r_a"):
        read_region_csv(path)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError):
        read_csv(empty)


def test_csv_rejects_non_finite_cells(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "x.csv", ("a",), [(np.nan,)])
