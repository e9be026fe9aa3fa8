import numpy as np
import pytest

from conftest import small_grid
from tailrisk_dc import precommit, timeconsistent
from tailrisk_dc.dp_core import Scenario, StepOperators
from tailrisk_dc.kou import PAPER_PARAMS, DensityConfig
from tailrisk_dc.lattice import build
from tailrisk_dc.risk import RiskSpec

P = PAPER_PARAMS
CFG = DensityConfig(12, 1.0)
BPOE = RiskSpec.bpoe(9.0e4, 5.0e4)
CVAR = RiskSpec.cvar(0.05, 1.0)


def bpoe_lattice():
    return build(small_grid(n=48, spacing_scale=5.0e3), BPOE)


@pytest.fixture(scope="module")
def tc_cvar(small_lattice, small_scenario, small_ops):
    return timeconsistent.solve(CVAR, small_scenario, small_lattice, P, CFG, ops=small_ops)


@pytest.fixture(scope="module")
def tc_bpoe(small_scenario):
    lat = bpoe_lattice()
    ops = StepOperators(lat, P, small_scenario, CFG)
    return timeconsistent.solve(BPOE, small_scenario, lat, P, CFG, ops=ops), ops


@pytest.mark.parametrize("spec", [CVAR, BPOE], ids=["cvar", "bpoe"])
def test_single_period_equals_precommitment(spec):
    sc = Scenario(T=1.0, M=1, q=1.0e5, W0=0.0)
    lat = bpoe_lattice() if spec.kind == "bpoe" else build(small_grid(n=48))
    ops = StepOperators(lat, P, sc, CFG)
    pc = precommit.solve(spec, sc, lat, P, CFG, ops=ops)
    tc = timeconsistent.solve(spec, sc, lat, P, CFG, ops=ops)
    assert tc.value_at_inception == pytest.approx(pc.value_at_inception, rel=1e-10)
    assert tc.optimal_threshold == pc.optimal_threshold
    assert tc.expected_terminal_wealth == pytest.approx(pc.expected_terminal_wealth, rel=1e-10)


def test_literal_reseed_degenerates():
    # under the literal reading every threshold layer carries the same values
    # after one step, so the earlier threshold search is a pure tie
    sc = Scenario(T=2.0, M=2, q=2.0e4, W0=0.0)
    lat = build(small_grid(n=24))
    ops = StepOperators(lat, P, sc, CFG)
    lit = timeconsistent.solve(CVAR, sc, lat, P, CFG, ops=ops, reseed="literal", keep_cube=True)
    eq = timeconsistent.solve(CVAR, sc, lat, P, CFG, ops=ops, keep_cube=True)
    cube = lit.info["cubes"][0]
    assert np.ptp(cube, axis=2).max() <= 1e-12 * np.abs(cube).max()
    assert np.all(lit.policy.threshold[0] == lat.w_nodes[0])
    assert np.ptp(eq.info["cubes"][0], axis=2).max() > 0.0
    assert len(np.unique(eq.policy.threshold[0])) > 1
    assert eq.optimal_threshold > lat.w_nodes[0]


def test_invalid_reseed_mode(small_lattice, small_scenario, small_ops):
    with pytest.raises(ValueError):
        timeconsistent.solve(CVAR, small_scenario, small_lattice, P, CFG, ops=small_ops, reseed="other")


def test_solution_invariants(tc_cvar, tc_bpoe, small_ops, small_lattice):
    bpoe_sol, bpoe_ops = tc_bpoe
    for sol, ops in ((tc_cvar, small_ops), (bpoe_sol, bpoe_ops)):
        pol = sol.policy
        assert np.all((pol.u >= 0) & (pol.u <= 1))
        finite = np.isfinite(pol.threshold)
        assert np.all(np.isin(pol.threshold[finite], ops.lattice.w_nodes))
        np.testing.assert_array_equal(~finite, sol.unbounded)
        assert np.all(pol.u[sol.unbounded] == 1.0)
        assert timeconsistent.track_expectation_tc(sol, ops) == sol.expected_terminal_wealth
        assert 0.0 <= sol.summary()["unbounded_fraction"] <= 1.0
    s = bpoe_sol.spec
    recon = s.gamma_o * bpoe_sol.risk_value - bpoe_sol.expected_terminal_wealth
    assert recon == pytest.approx(bpoe_sol.value_at_inception, rel=1e-8)


def test_unbounded_flag_for_low_wealth(tc_bpoe):
    sol, ops = tc_bpoe
    # one period left and far below D: every outcome sits under D, where the
    # penalty (W - w)/(W - D) falls with W, so the search runs off the top
    low = ops.wealth < 1.0e3
    assert sol.unbounded[-1, low].all()
    assert np.all(sol.policy.threshold[-1, low] == np.inf)
    assert np.all(sol.policy.u[-1, low] == 1.0)


def test_bpoe_rejects_grid_below_d(small_lattice, small_scenario):
    with pytest.raises(ValueError):
        timeconsistent.solve(BPOE, small_scenario, small_lattice, P, CFG)
