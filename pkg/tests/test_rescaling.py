import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascadewave.model import EdgeParams, PathwaySpec
from cascadewave.rescaling import (Mode, NoHomogeneousWave, SpeedOracle, SpeedTable,
                                   coordinates_from_speeds, edge_speed, homogeneous_speed,
                                   rescale)


def log_linear_table(a=0.3, b=-0.05, c=0.4, n_B=6, u=np.linspace(-0.9, 0.9, 5)):
    """Table whose log speed is linear in (ln(B-1), u): bilinear interpolation is exact."""
    lb = np.linspace(math.log(0.01), math.log(1000.0), n_B)
    speeds = np.exp(np.log(a) + b * lb[:, None] + c * np.asarray(u)[None, :])
    return SpeedTable(lb, np.asarray(u, dtype=float), speeds)


def test_two_edge_harmonic_example():
    coords = coordinates_from_speeds([1.0, 3.0])
    assert coords.c_bar == 0.75
    np.testing.assert_allclose(coords.ds, [0.75, 0.25], rtol=1e-15)
    np.testing.assert_allclose(coords.s, [0.0, 0.75, 1.0], rtol=1e-15)


@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=300))
def test_coordinates_span_unit_interval(speeds):
    coords = coordinates_from_speeds(speeds)
    assert coords.s[0] == 0.0 and coords.s[-1] == 1.0
    assert math.fsum(coords.ds) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(coords.s) > 0)
    # spans are inversely proportional to speed
    np.testing.assert_allclose(coords.ds * np.asarray(speeds), coords.c_bar, rtol=1e-9)


@pytest.mark.parametrize("n", [2, 7, 200])
def test_homogeneous_spans_are_uniform(n):
    coords = coordinates_from_speeds(np.full(n, 0.29))
    np.testing.assert_allclose(coords.ds, 1.0 / n, rtol=1e-12)
    np.testing.assert_allclose(coords.positions, np.arange(1, n + 1) / n, rtol=1e-12)


@given(B=st.floats(1.02, 900.0), u=st.floats(-0.9, 0.9))
def test_table_interpolation_exact_on_log_linear_speeds(B, u):
    table = log_linear_table()
    want = 0.3 * (B - 1.0) ** -0.05 * math.exp(0.4 * u)
    assert table(B, u / B) == pytest.approx(want, rel=1e-12)


def test_table_single_bias_column_and_range_checks():
    table = log_linear_table(u=[0.0])
    assert table(11.0, 0.0) == pytest.approx(0.3 * 10.0 ** -0.05, rel=1e-12)
    with pytest.raises(ValueError):
        table(1.001, 0.0)
    with pytest.raises(ValueError):
        log_linear_table()(5.0, 0.95 / 5.0)
    assert table.covers(1.5, 900.0) and not table.covers(1.005, 2.0)


def test_table_json_round_trip():
    table = log_linear_table()
    again = SpeedTable.from_json(table.to_json())
    np.testing.assert_array_equal(again.speeds, table.speeds)
    assert again(7.0, 0.05) == table(7.0, 0.05)


def test_table_oracle_memoises_and_scales_alpha():
    oracle = SpeedOracle(Mode.Table, log_linear_table())
    p = EdgeParams.from_B(2.5, 7.0, 0.05)
    c = edge_speed(p, oracle)
    assert c == pytest.approx(2.5 * log_linear_table()(7.0, 0.05), rel=1e-15)
    assert len(oracle.cache) == 1
    edge_speed(EdgeParams.from_B(1.0, 7.0, 0.05), oracle)
    assert len(oracle.cache) == 1


def test_exact_oracle_runs_one_simulation_per_parameter_pair():
    oracle = SpeedOracle(Mode.Exact, n=40)
    spec = PathwaySpec((EdgeParams(1.0, 2.0), EdgeParams(3.0, 2.0), EdgeParams(0.5, 2.0)), 1.0)
    coords = rescale(spec, oracle)
    assert oracle.simulations == 1
    base = homogeneous_speed(3.0, 0.0, n=40)
    np.testing.assert_allclose(coords.speeds, [base, 3 * base, 0.5 * base], rtol=1e-14)
    np.testing.assert_allclose(coords.ds, np.array([3, 1, 6]) / 10, rtol=1e-12)


@pytest.mark.parametrize("phi", [0.5, -0.5, 0.75])
def test_no_homogeneous_wave_outside_window(phi):
    with pytest.raises(NoHomogeneousWave):
        edge_speed(EdgeParams(1.0, 1.5, phi), SpeedOracle(Mode.Table, log_linear_table()))


def test_rescale_names_the_failing_edge():
    spec = PathwaySpec((EdgeParams(1.0, 1.5), EdgeParams(1.0, 1.5, 0.7)), 1.0)
    with pytest.raises(NoHomogeneousWave, match="edge 2"):
        rescale(spec, SpeedOracle(Mode.Table, log_linear_table()))


def test_coordinates_csv():
    lines = coordinates_from_speeds([1.0, 3.0]).to_csv().splitlines()
    assert lines[0] == "i,s_i,ds_i,c_i"
    assert lines[1] == "0,0,,"
    assert lines[-1].startswith("2,1,0.25,3")
