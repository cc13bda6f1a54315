import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from cascadewave.integrate import (IntegrationError, IntegratorConfig, PathwayRHS, integrate,
                                   observed_order, order_check, rk_fixed, solve)
from cascadewave.model import EdgeParams, PathwaySpec


def test_fixed_step_order_on_linear_decay():
    order = observed_order(lambda t, y: -y, [1.0], 2.0, 0.1)
    assert 4.7 < order < 5.3


def test_fixed_step_order_on_pathway():
    spec = PathwaySpec.uniform(6, EdgeParams(1.0, 1.5, 0.1), 1.0)
    assert 4.5 < order_check(spec, t_end=1.0, h=0.25) < 5.5


def test_rk_fixed_needs_whole_steps():
    with pytest.raises(ValueError):
        rk_fixed(lambda t, y: -y, [1.0], 1.0, 0.3)


@pytest.mark.parametrize("rate", [0.1, 1.0, 5.0])
def test_adaptive_solution_of_exponential(rate):
    t, y = solve(lambda t, y: -rate * y, [1.0], 10.0, 0.5, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(t, np.arange(21) * 0.5, rtol=0, atol=1e-12)
    np.testing.assert_allclose(y[:, 0], np.exp(-rate * t), rtol=1e-8, atol=1e-14)


def test_samples_land_on_grid_and_stop_early():
    t, y = solve(lambda t, y: np.ones(1), [0.0], 100.0, 1.0, stop=lambda t, y: y[0] >= 7.5)
    assert t[-1] == 8.0
    assert y[-1, 0] == pytest.approx(8.0, rel=1e-12)


def test_pathway_against_reference_solver():
    rng = np.random.default_rng(11)
    edges = tuple(EdgeParams(float(a), float(b)) for a, b in
                  zip(rng.lognormal(0, 0.4, 30), 1 + 4 * rng.lognormal(0, 0.4, 30)))
    spec = PathwaySpec(edges, 1.0)
    traj = integrate(spec, IntegratorConfig(t_end=40.0, sample_dt=2.0))
    ref = solve_ivp(PathwayRHS(spec), (0, 40), spec.initial_state(), method="DOP853",
                    t_eval=traj.t, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(traj.x, ref.y.T, atol=2e-7)


def test_equilibrium_stays_constant():
    spec = PathwaySpec.uniform(10, EdgeParams(1.0, 2.0), 0.0, 0.0)
    traj = integrate(spec, IntegratorConfig(t_end=50.0))
    assert np.all(traj.x == 0.0)
    assert traj.arrival_time is None


def test_arrival_time_and_stop_on_arrival():
    spec = PathwaySpec.uniform(20, EdgeParams(1.0, 2.0), 1.0)
    full = integrate(spec, IntegratorConfig(t_end=300.0))
    early = integrate(spec, IntegratorConfig(t_end=300.0, stop_on_arrival=True))
    assert full.arrival_time == early.arrival_time
    assert early.t[-1] == math.ceil(early.arrival_time)
    j = len(early.t) - 1
    np.testing.assert_array_equal(early.x, full.x[: j + 1])
    dev = np.abs(full.x[:, -1] + 1.0)
    assert dev[j - 1] < 1e-4 <= dev[j]


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), sigma=st.floats(0.0, 1.0))
def test_states_never_leave_the_box(seed, sigma):
    rng = np.random.default_rng(seed)
    n = 12
    edges = tuple(EdgeParams(float(a), 1 + 4 * float(b), float(f)) for a, b, f in
                  zip(rng.lognormal(0, sigma, n) * 5, rng.lognormal(0, sigma, n),
                      rng.uniform(-0.3, 0.3, n)))
    spec = PathwaySpec(edges, float(rng.choice([-1.0, 1.0])), float(rng.uniform(-1, 1)))
    traj = integrate(spec, IntegratorConfig(t_end=30.0))
    assert np.all(np.abs(traj.x) <= 1.0)


@pytest.mark.parametrize("kw", [
    dict(t_end=0.0), dict(sample_dt=-1.0), dict(t_end=1.0, sample_dt=2.0),
    dict(rel_tol=0.1), dict(abs_tol=0.0), dict(terminal_threshold=0.0),
])
def test_integrator_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_integrator_config_is_strict():
    cfg = IntegratorConfig(t_end=12.0)
    assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(KeyError):
        IntegratorConfig.from_dict({"t_end": 1.0, "tol": 1e-3})


def test_step_budget_exhaustion_reports_last_time():
    with pytest.raises(IntegrationError) as info:
        solve(lambda t, y: -y, [1.0], 100.0, 1.0, max_steps=5)
    assert info.value.t < 100.0


def test_trajectory_csv_layout():
    spec = PathwaySpec.uniform(3, EdgeParams(1.0, 2.0), 1.0)
    traj = integrate(spec, IntegratorConfig(t_end=2.0))
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x1,x2,x3"
    assert len(lines) == 4
    assert lines[1] == "0,-1,-1,-1"
