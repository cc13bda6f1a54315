import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascadewave.integrate import IntegratorConfig
from cascadewave.metrics import Frame, ShapeResidualSeries, VelocitySeries
from cascadewave.model import EdgeParams, PathwaySpec
from cascadewave.rescaling import Mode, SpeedOracle, SpeedTable
from cascadewave.sweep import (EnsembleFailure, GradientKind, GradientSpec, Quartiles,
                               StochasticEnsembleSpec, WindowTooShort, _aggregate,
                               build_gradient, default_sigma_grid, realization_normals,
                               rise, run_comparison, sample_realization, sweep, vise)


def power_law_table():
    """Unbiased speed table with c = 0.3 (B - 1)^-0.05 over a wide B range."""
    lb = np.linspace(math.log(1e-3), math.log(1e4), 8)
    return SpeedTable(lb, np.array([0.0]), (0.3 * np.exp(-0.05 * lb))[:, None])


def test_alpha_gradient_is_linear():
    spec = build_gradient(GradientSpec(GradientKind.AlphaLinear, 1.0, 5.0,
                                       EdgeParams.from_B(1.0, 100.0), n=5))
    a, b, f = spec.arrays()
    np.testing.assert_allclose(a, [1, 2, 3, 4, 5])
    np.testing.assert_allclose(2 * b - 1, 100.0)


def test_B_gradient_is_log_spaced_in_B_minus_one():
    spec = build_gradient(GradientSpec(GradientKind.BLog, 1.02, 201.0, EdgeParams(1.0, 1.5), n=9))
    _, b, _ = spec.arrays()
    B = 2 * b - 1
    assert B[0] == pytest.approx(1.02, rel=1e-14) and B[-1] == pytest.approx(201.0, rel=1e-14)
    np.testing.assert_allclose(np.diff(np.log(B - 1)), np.log(200 / 0.02) / 8, rtol=1e-12)


def test_phi_gradient_must_stay_bistable():
    base = EdgeParams.from_B(1.0, 5.0)
    spec = build_gradient(GradientSpec(GradientKind.PhiLinear, 0.15, -0.15, base, n=3))
    np.testing.assert_allclose(spec.arrays()[2], [0.15, 0.0, -0.15], atol=1e-16)
    with pytest.raises(ValueError):
        build_gradient(GradientSpec(GradientKind.PhiLinear, 0.25, -0.15, base, n=3))


def test_realization_draws_are_shared_across_sigma():
    z1 = realization_normals(7, 3, 50)
    z2 = realization_normals(7, 3, 50)
    np.testing.assert_array_equal(z1[0], z2[0])
    assert not np.array_equal(realization_normals(7, 4, 50)[0], z1[0])
    assert not np.array_equal(realization_normals(8, 3, 50)[0], z1[0])
    lo = sample_realization(StochasticEnsembleSpec(sigma=0.2, n=50, seed=7), 3)
    hi = sample_realization(StochasticEnsembleSpec(sigma=0.8, n=50, seed=7), 3)
    a_lo, b_lo, _ = lo.arrays()
    a_hi, b_hi, _ = hi.arrays()
    np.testing.assert_allclose(np.log(a_hi), 4 * np.log(a_lo), rtol=1e-12)
    np.testing.assert_allclose(np.log(b_hi - 1) - np.log(4), 4 * (np.log(b_lo - 1) - np.log(4)),
                               rtol=1e-10, atol=1e-12)


def test_zero_sigma_realization_is_homogeneous():
    spec = sample_realization(StochasticEnsembleSpec(sigma=0.0, n=20), 5)
    assert spec.is_uniform and spec.edges[0] == EdgeParams(1.0, 5.0, 0.0)


@pytest.mark.parametrize("kw", [dict(sigma=-0.1), dict(alpha0=0.0), dict(beta0=1.0)])
def test_ensemble_spec_validation(kw):
    with pytest.raises(ValueError):
        StochasticEnsembleSpec(**kw)


def test_vise_of_sine():
    t = np.linspace(0, 2 * np.pi, 20001)
    v = VelocitySeries(t, 3.0 + np.sin(t), Frame.Original)
    assert vise(v) == pytest.approx(np.pi, rel=1e-7)


@given(c=st.floats(0.0, 10.0))
def test_vise_of_constant_is_zero(c):
    t = np.arange(10.0)
    assert vise(VelocitySeries(t, np.full(10, c), Frame.Rescaled)) == pytest.approx(0.0, abs=1e-20)


def test_rise_of_linear_residual():
    t = np.linspace(0, 2, 4001)
    assert rise(ShapeResidualSeries(t, t, 0.0, Frame.Original)) == pytest.approx(8 / 3, rel=1e-6)
    with pytest.raises(WindowTooShort):
        rise(ShapeResidualSeries(t[:2], t[:2], 0.0, Frame.Original))


def test_quartiles_use_linear_percentiles():
    q = Quartiles.of([4.0, 1.0, 3.0, 2.0])
    assert (q.q1, q.median, q.q3) == (1.75, 2.5, 3.25)
    assert math.isnan(Quartiles.of([]).median)


def test_default_sigma_grid():
    assert default_sigma_grid() == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


def test_aggregate_rejects_mostly_failed_levels():
    recs = [{"excluded": True, "alpha_min": 1, "alpha_max": 1, "beta_min": 5, "beta_max": 5}] * 3
    ok = {"excluded": False, "alpha_min": 1, "alpha_max": 1, "beta_min": 5, "beta_max": 5,
          "vise_original": 1.0, "vise_rescaled": 1.0, "rise_original": 1.0, "rise_rescaled": 1.0}
    with pytest.raises(EnsembleFailure):
        _aggregate(0.5, recs + [ok])
    row = _aggregate(0.5, recs[:2] + [ok, ok])
    assert row.included == 2 and row.excluded == 2


def test_homogeneous_frames_agree():
    spec = PathwaySpec.uniform(40, EdgeParams.from_B(1.0, 9.0), 1.0)
    cmp = run_comparison(spec, SpeedOracle(Mode.Table, power_law_table()))
    np.testing.assert_allclose(cmp.coords.ds, 1 / 40, rtol=1e-12)
    np.testing.assert_allclose(cmp.original.velocity.values, cmp.rescaled.velocity.values,
                               rtol=1e-6)
    assert cmp.original.vise == pytest.approx(cmp.rescaled.vise, rel=1e-6)
    assert cmp.t_start < cmp.t_J < cmp.t_end


def test_alpha_gradient_flattens_velocity():
    g = GradientSpec(GradientKind.AlphaLinear, 1.0, 5.0, EdgeParams.from_B(1.0, 100.0), n=50)
    spec = build_gradient(g)
    cmp = run_comparison(spec, SpeedOracle(Mode.Table, power_law_table()))
    assert cmp.rescaled.vise < 1e-2 * cmp.original.vise
    J_o = cmp.original.residual.reference_index
    assert cmp.original.residual.values[cmp.original.residual.times == cmp.trajectory.t[J_o]] == 0


def small_ensemble(**kw):
    return StochasticEnsembleSpec(**{"n": 30, "realizations": 3, "seed": 11, **kw})


def test_sweep_is_deterministic_and_thread_independent():
    oracle = SpeedOracle(Mode.Table, power_law_table())
    config = IntegratorConfig(t_end=3000.0, stop_on_arrival=True)
    a = sweep(small_ensemble(), [0.0, 0.4], oracle, config)
    b = sweep(small_ensemble(), [0.0, 0.4], oracle, config, threads=2)
    assert a.to_csv() == b.to_csv()
    assert a.details_jsonl() == b.details_jsonl()
    lines = a.to_csv().splitlines()
    assert lines[0] == "sigma,metric,frame,median,q1,q3,excluded"
    assert len(lines) == 1 + 2 * 4
    assert a.extrema_csv().splitlines()[0] == "sigma,param,mean_min,mean_max"
    assert [r["realization"] for r in a.details[:3]] == [0, 1, 2]
    other = sweep(small_ensemble(seed=12), [0.4], oracle, config)
    assert other.details_jsonl() != a.details_jsonl()


def test_sweep_rejects_biased_ensembles_and_bad_grids():
    with pytest.raises(ValueError):
        sweep(small_ensemble(phi=0.1), [0.0])
    with pytest.raises(ValueError):
        sweep(small_ensemble(), [1.5])
