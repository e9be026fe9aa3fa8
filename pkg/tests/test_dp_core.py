import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import small_grid
from tailrisk_dc.dp_core import (
    Policy, Scenario, StepOperators, argopt, cash_only_wealth, control_matrix, convolve_step,
    full_equity_mean, rebalance, settle_interest, terminal_condition,
)
from tailrisk_dc.kou import PAPER_PARAMS, DensityConfig
from tailrisk_dc.lattice import build, interp_b
from tailrisk_dc.risk import RiskSpec, payoff

P = PAPER_PARAMS


# Scenario

def test_scenario_basics():
    s = Scenario(T=30.0, M=30, q=20000.0)
    assert s.dt == 1.0 and s.times[0] == 0.0 and s.times[-1] == 29.0
    assert len(s.q) == 30 and s.w_start == 20000.0
    assert Scenario(**s.to_dict()) == s
    with pytest.raises(ValueError):
        Scenario(T=1.0, M=1, q=0.0, W0=0.0)
    with pytest.raises(ValueError):
        Scenario(T=1.0, M=2, q=[1.0, -1.0])
    with pytest.raises(ValueError):
        Scenario(T=0.0, M=2, q=1.0)


def test_annuity_and_full_equity_formulas():
    s = Scenario(T=3.0, M=3, q=[1.0, 2.0, 3.0], W0=5.0)
    r = 0.1
    expected = (5.0 + 1.0) * math.exp(3 * r) + 2.0 * math.exp(2 * r) + 3.0 * math.exp(r)
    assert cash_only_wealth(s, r) == pytest.approx(expected, rel=1e-14)
    assert full_equity_mean(s, 0.2) == pytest.approx(cash_only_wealth(s, 0.2))


# terminal condition

def test_terminal_condition_cvar_zero_threshold(small_lattice):
    V = terminal_condition(0.0, RiskSpec.cvar(0.05, 3.0), small_lattice)
    np.testing.assert_allclose(V, small_lattice.wealth_nodes(), rtol=1e-14)


def test_terminal_condition_bpoe(small_lattice):
    spec = RiskSpec.bpoe(5e4, 1e6)
    W = 1e5
    V = terminal_condition(W, spec, small_lattice)
    w = small_lattice.wealth_nodes()
    np.testing.assert_array_equal(V[w >= W], -w[w >= W])
    n, j = 70, 3
    assert V[n, j] == payoff(w[n, j], W, spec)
    cube = terminal_condition(np.array([W, 2 * W]), spec, small_lattice)
    np.testing.assert_array_equal(cube[:, :, 0], V)


# interest settlement

def test_settle_zero_rate_identity(small_lattice, rng):
    V = rng.normal(size=small_lattice.shape)
    np.testing.assert_allclose(settle_interest(V, small_lattice, 0.0, 1.0), V, rtol=0, atol=1e-15)


def test_settle_linear_in_b_exact(small_lattice):
    b = small_lattice.b_nodes
    V = np.broadcast_to(2.0 * b[None, :], small_lattice.shape)
    out = settle_interest(V, small_lattice, 0.05, 1.0)
    np.testing.assert_allclose(out, np.broadcast_to(V * math.exp(0.05), out.shape), rtol=1e-12)


def test_settle_single_node_by_hand(small_lattice, rng):
    V = rng.normal(size=small_lattice.shape)
    b = small_lattice.b_nodes
    j = 5
    target = b[j] * math.exp(0.03)
    k = np.searchsorted(b, target) - 1
    t = (target - b[k]) / (b[k + 1] - b[k])
    expected = (1 - t) * V[:, k] + t * V[:, k + 1]
    np.testing.assert_allclose(settle_interest(V, small_lattice, 0.03, 1.0)[:, j], expected, rtol=1e-12)


# convolution

def test_convolution_constant_slice_gbm():
    lat = build(small_grid(n_y_dag=1024, n=4))
    p0 = P.replace(lam=0.0)
    V = np.full(lat.shape, 7.0)
    out = convolve_step(V, lat, p0, DensityConfig(12, 1.0))
    np.testing.assert_allclose(out[lat.interior], 7.0, rtol=1e-9)


def test_convolution_boundary_rows(small_lattice, rng):
    V = rng.uniform(1, 2, size=small_lattice.shape)
    out = convolve_step(V, small_lattice, P, DensityConfig(12, 1.0))
    np.testing.assert_array_equal(out[small_lattice.below], V[small_lattice.below])
    np.testing.assert_allclose(out[small_lattice.above], V[small_lattice.above] * math.exp(P.mu), rtol=1e-14)
    with pytest.raises(ValueError):
        convolve_step(V[:-1], small_lattice, P, DensityConfig(12, 1.0))


def test_convolution_monotone(small_lattice, rng):
    A = rng.normal(size=small_lattice.shape)
    B = A + rng.uniform(0, 1, size=A.shape)
    cfg = DensityConfig(12, 1.0)
    assert np.all(convolve_step(B, small_lattice, P, cfg) >= convolve_step(A, small_lattice, P, cfg) - 1e-12)


# rebalance

def test_rebalance_total_wealth_slice_ties_to_zero(small_lattice):
    V = small_lattice.wealth_nodes()
    w = np.geomspace(1e3, 1e6, 30)
    u, v = rebalance(V, small_lattice, w, minimize=False)
    np.testing.assert_array_equal(u, 0.0)
    # u = 0 reads the slice at y_min_dag, i.e. with a stock holding of exp(y_min_dag)
    np.testing.assert_allclose(v, w + math.exp(small_lattice.y_nodes[0]), rtol=1e-9)


def test_rebalance_two_controls_enumeration(rng):
    lat = dataclasses.replace(build(small_grid(n=8)), u_nodes=np.array([0.0, 1.0]))
    V = rng.normal(size=lat.shape)
    w = np.geomspace(1e3, 1e6, 25)
    u, v = rebalance(V, lat, w, minimize=True)
    for i, wi in enumerate(w):
        cash = control_matrix(lat, [wi], [0.0]) @ V.ravel()
        stock = control_matrix(lat, [wi], [1.0]) @ V.ravel()
        best = min(cash[0], stock[0])
        assert v[i] == pytest.approx(best, rel=1e-12)
        assert u[i] == (0.0 if cash[0] <= stock[0] else 1.0)


def test_rebalance_monotone_slice_gives_monotone_value(small_lattice, rng):
    for _ in range(5):
        # nondecreasing in both y and b
        inc = rng.uniform(0, 1, size=small_lattice.shape)
        V = np.cumsum(np.cumsum(inc, axis=0), axis=1)
        w = np.geomspace(1e3, 1e7, 60)
        _, v = rebalance(V, small_lattice, w, minimize=False)
        assert np.all(np.diff(v) >= -1e-9)


def test_rebalance_rejects_nonpositive_wealth(small_lattice):
    with pytest.raises(ValueError):
        rebalance(np.zeros(small_lattice.shape), small_lattice, [0.0], minimize=False)


def test_control_matrix_weights_convex(small_lattice, rng):
    w = rng.uniform(1e2, 1e7, 500)
    u = rng.uniform(0, 1, 500)
    R = control_matrix(small_lattice, w, u)
    assert R.data.min() >= 0
    np.testing.assert_allclose(np.asarray(R.sum(axis=1)).ravel(), 1.0, rtol=1e-12)


def test_argopt_ties_go_to_smallest_index():
    v = np.array([[1.0, 3.0, 3.0], [2.0, 2.0, 2.0]])
    idx, best = argopt(v, axis=1, minimize=False)
    assert list(idx) == [1, 0] and list(best) == [3.0, 2.0]
    idx, best = argopt(v, axis=1, minimize=True)
    assert list(idx) == [0, 0]


# composed step operators

def _clamp_bias(ops, scenario):
    # u = 0 reads the slice at y_min_dag, which carries a stock holding exp(y_min_dag)
    return scenario.M * math.exp(ops.lattice.y_nodes[0]) * math.exp(P.mu * scenario.T)


def test_operators_cash_policy_expectation(small_ops, small_scenario):
    pol = Policy.constant(small_scenario, 0.0)
    exact = cash_only_wealth(small_scenario, P.r)
    got = small_ops.track_expectation(pol)
    assert exact <= got <= exact + _clamp_bias(small_ops, small_scenario)


def test_operators_full_equity_expectation(small_ops, small_scenario):
    pol = Policy.constant(small_scenario, 1.0)
    assert small_ops.track_expectation(pol) == pytest.approx(full_equity_mean(small_scenario, P.mu), rel=1e-4)


def test_literal_settlement_matches_comoving_on_linear_data(small_lattice, small_scenario):
    a = StepOperators(small_lattice, P, small_scenario, DensityConfig(12, 1.0), comoving_bond=False)
    pol = Policy.constant(small_scenario, 0.0)
    exact = cash_only_wealth(small_scenario, P.r)
    assert exact <= a.track_expectation(pol) <= exact + _clamp_bias(a, small_scenario)


def test_operators_reject_mismatched_density(small_lattice, small_scenario):
    with pytest.raises(ValueError):
        StepOperators(small_lattice, P, small_scenario, DensityConfig(12, 2.0))


def _full_step(ops, V, m, minimize):
    """settle, convolve, rebalance and map back to the nodes of t_m."""
    _, best = ops.search(ops.propagate(V), m, minimize)
    return ops.to_nodes(best, m)


def test_composed_step_monotone(small_ops, rng):
    for trial in range(10):
        A = rng.normal(size=small_ops.shape) * 1e5
        B = A + rng.uniform(0, 1e5, size=A.shape) * (rng.uniform(size=A.shape) < 0.5)
        for minimize in (False, True):
            assert np.all(_full_step(small_ops, B, 2, minimize) >= _full_step(small_ops, A, 2, minimize) - 1e-6)


def test_linf_stability(small_ops, small_scenario, rng):
    V = rng.uniform(-1, 1, size=small_ops.shape)
    bound = np.abs(V).max()
    growth = math.exp(P.mu * small_scenario.dt)
    for m in range(small_scenario.M - 1, -1, -1):
        V = _full_step(small_ops, V, m, minimize=False)
        bound *= growth
        assert np.abs(V).max() <= bound * (1 + 1e-9)


def test_rebalance_depends_only_on_total_wealth(small_ops, rng):
    V = small_ops.propagate(rng.normal(size=small_ops.shape))
    _, best = small_ops.search(V, 1, minimize=False)
    # values at two (y, b) nodes with equal total wealth after the cashflow must agree
    mapped = small_ops.to_nodes(best, 1)
    w_nodes = small_ops.wealth_nodes(1) + small_ops.scenario.q[1]
    direct = np.interp(w_nodes, small_ops.wealth, best)
    np.testing.assert_allclose(mapped, direct, rtol=1e-12, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(1e3, 1e7))
def test_gather_recovers_linear_slices(u, w):
    lat = build(small_grid())
    V = np.exp(lat.y_nodes)[:, None] * 2.0 + lat.b_nodes[None, :] * 3.0
    R = control_matrix(lat, [w], [u])
    s, b = u * w, (1 - u) * w
    s_clamped = min(max(s, math.exp(lat.y_nodes[0])), math.exp(lat.y_nodes[-1]))
    assert (R @ V.ravel())[0] == pytest.approx(2.0 * s_clamped + 3.0 * b, rel=1e-9)
