import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascadewave.model import (CascadeState, DomainError, EdgeParams, PathwaySpec, Region,
                               classify, edge_rhs, pathway_rhs, uniform_rhs)


def literal_rate(u, x, alpha, beta, phi):
    """Node rate transcribed term by term (oracle for the vectorised code)."""
    act = (1 + phi) / 4 * (1 + u) * alpha * beta * (1 - x) / (2 * beta - (1 + x))
    inh = (1 - phi) / 4 * (1 - u) * alpha * beta * (1 + x) / (2 * beta - (1 - x))
    return act - inh


betas = st.floats(1.01, 50.0)
phis = st.floats(-1.0, 1.0)
states = st.floats(-1.0, 1.0)


@pytest.mark.parametrize("kwargs", [
    dict(alpha=0.0, beta=2.0), dict(alpha=-1.0, beta=2.0), dict(alpha=1.0, beta=1.0),
    dict(alpha=1.0, beta=0.5), dict(alpha=1.0, beta=2.0, phi=1.5),
    dict(alpha=1.0, beta=2.0, phi=-1.01),
])
def test_edge_params_reject_out_of_domain(kwargs):
    with pytest.raises(DomainError):
        EdgeParams(**kwargs)


def test_critical_bias_at_beta_one_and_a_half():
    p = EdgeParams(1.0, 1.5)
    assert p.B == 2.0
    assert p.phi_c == 0.5


@given(beta=betas)
def test_critical_bias_is_reciprocal_of_B(beta):
    p = EdgeParams(1.0, beta)
    assert p.phi_c == 1.0 / (2.0 * beta - 1.0)
    assert EdgeParams.from_B(1.0, p.B).beta == pytest.approx(beta, rel=1e-14)


@given(u=states, x=states, alpha=st.floats(0.01, 10), beta=betas, phi=phis)
def test_edge_rhs_matches_literal_formula(u, x, alpha, beta, phi):
    p = EdgeParams(alpha, beta, phi)
    assert edge_rhs(u, x, p) == pytest.approx(literal_rate(u, x, alpha, beta, phi),
                                              rel=1e-12, abs=1e-14)


@given(x=states, alpha=st.floats(0.01, 10), beta=betas, phi=phis)
def test_uniform_rhs_is_edge_rhs_with_equal_neighbours(x, alpha, beta, phi):
    p = EdgeParams(alpha, beta, phi)
    assert uniform_rhs(x, p) == pytest.approx(edge_rhs(x, x, p), rel=1e-10, abs=1e-13)


def test_pathway_rhs_uses_input_then_upstream_nodes():
    rng = np.random.default_rng(4)
    n = 7
    edges = tuple(EdgeParams(float(a), float(b), float(f)) for a, b, f in
                  zip(rng.uniform(0.5, 3, n), rng.uniform(1.2, 8, n), rng.uniform(-0.5, 0.5, n)))
    spec = PathwaySpec(edges, 0.3)
    x = rng.uniform(-1, 1, n)
    got = pathway_rhs(CascadeState(0.0, x), spec)
    upstream = np.concatenate(([0.3], x[:-1]))
    want = [literal_rate(u, xi, e.alpha, e.beta, e.phi) for u, xi, e in zip(upstream, x, edges)]
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-15)


def test_pathway_rhs_rejects_wrong_shape_and_domain():
    spec = PathwaySpec.uniform(3, EdgeParams(1, 2), 1.0)
    with pytest.raises(ValueError):
        pathway_rhs(np.zeros(4), spec)
    with pytest.raises(DomainError):
        pathway_rhs(np.array([0.0, 1.1, 0.0]), spec)


@pytest.mark.parametrize("phi,region", [
    (-0.75, Region.Region1), (-0.3, Region.Region2), (0.0, Region.Region2),
    (0.3, Region.Region2), (0.75, Region.Region3),
])
def test_classify_figure_regions(phi, region):
    eq = classify(EdgeParams(1.0, 1.5, phi))
    assert eq.region is region
    assert eq.phi_c == 0.5
    if region is Region.Region2:
        assert eq.stable == (-1.0, 1.0)
        assert eq.xi == pytest.approx(-2.0 * phi)
    else:
        assert eq.xi is None


@pytest.mark.parametrize("phi", [0.5, -0.5])
def test_boundary_bias_is_degenerate_region2(phi):
    eq = classify(EdgeParams(1.0, 1.5, phi))
    assert eq.region is Region.Region2 and eq.degenerate
    assert abs(eq.xi) == 1.0


@settings(max_examples=100)
@given(beta=betas, phi=phis)
def test_rhs_sign_pattern_matches_equilibria(beta, phi):
    p = EdgeParams(1.0, beta, phi)
    eq = classify(p)
    xs = np.linspace(-1, 1, 401)[1:-1]
    f = np.array([uniform_rhs(x, p) for x in xs])
    assert uniform_rhs(-1.0, p) == 0.0 and uniform_rhs(1.0, p) == 0.0
    if eq.region is Region.Region1:
        assert np.all(f <= 0)
    elif eq.region is Region.Region3:
        assert np.all(f >= 0)
    else:
        # flows away from the threshold toward both stable states
        away = np.abs(xs - eq.xi) > 1e-9
        assert np.all(np.sign(f[away]) == np.sign(xs[away] - eq.xi))


def test_pathway_needs_two_nodes_and_valid_states():
    p = EdgeParams(1, 2)
    with pytest.raises(DomainError):
        PathwaySpec((p,), 1.0)
    with pytest.raises(DomainError):
        PathwaySpec.uniform(3, p, 1.5)
    with pytest.raises(DomainError):
        PathwaySpec.uniform(3, p, 1.0, initial=(0.0, 0.0))


@given(n=st.integers(2, 12), x0=states, uniform=st.booleans(), data=st.data())
def test_pathway_dict_round_trip(n, x0, uniform, data):
    edge = st.builds(EdgeParams, st.floats(0.01, 10), betas, phis)
    edges = (data.draw(edge),) * n if uniform else tuple(data.draw(st.lists(edge, min_size=n,
                                                                            max_size=n)))
    initial = data.draw(st.one_of(states, st.tuples(*[states] * n)))
    spec = PathwaySpec(edges, x0, initial)
    again = PathwaySpec.from_json(json.dumps(json.loads(spec.to_json())))
    assert again == spec
    assert ("uniform" in spec.to_dict()) == spec.is_uniform


@pytest.mark.parametrize("doc,err", [
    ({"n": 3, "x0": 1.0}, KeyError),
    ({"n": 3, "x0": 1.0, "uniform": {"alpha": 1, "beta": 2}, "edges": []}, KeyError),
    ({"n": 3, "uniform": {"alpha": 1, "beta": 2}}, KeyError),
    ({"n": 3, "x0": 1.0, "uniform": {"alpha": 1, "beta": 2}, "extra": 1}, KeyError),
    ({"n": 3, "x0": 1.0, "uniform": {"alpha": 1, "beta": 2, "gamma": 0}}, KeyError),
    ({"n": 3, "x0": 1.0, "edges": [{"alpha": 1, "beta": 2}] * 2}, ValueError),
])
def test_pathway_from_dict_is_strict(doc, err):
    with pytest.raises(err):
        PathwaySpec.from_dict(doc)


def test_equilibrium_states_are_fixed_points():
    p = EdgeParams(2.0, 3.0, 0.1)
    xi = classify(p).xi
    assert uniform_rhs(xi, p) == pytest.approx(0.0, abs=1e-15)
    spec = PathwaySpec.uniform(5, p, -1.0, -1.0)
    assert np.all(pathway_rhs(spec.initial_state(), spec) == 0.0)
    assert math.isclose(xi, -0.1 * 5)
