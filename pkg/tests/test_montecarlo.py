import math

import numpy as np
import pytest
from scipy import stats

from tailrisk_dc import precommit
from tailrisk_dc.config import SimConfig
from tailrisk_dc.dp_core import Policy, Scenario, cash_only_wealth, full_equity_mean
from tailrisk_dc.kou import PAPER_PARAMS, DensityConfig
from tailrisk_dc.montecarlo import (
    evaluate, histogram, read_samples, simulate, standard_error, write_samples,
)
from tailrisk_dc.risk import RiskSpec

P = PAPER_PARAMS


def test_all_cash_is_deterministic_annuity(small_scenario):
    pol = Policy.constant(small_scenario, 0.0)
    x = simulate(pol, small_scenario, P, SimConfig(n_paths=1000, block_size=256))
    exact = cash_only_wealth(small_scenario, P.r)
    assert np.all(x == x[0])
    assert x[0] == pytest.approx(exact, rel=1e-12)


def test_all_stock_gbm_mean_within_three_se():
    sc = Scenario(T=10.0, M=10, q=1.0e4, W0=5.0e4)
    p = P.replace(lam=0.0)
    x = simulate(Policy.constant(sc, 1.0), sc, p, SimConfig(n_paths=200_000, seed=7))
    assert abs(x.mean() - full_equity_mean(sc, p.mu)) <= 3 * standard_error(x)


def test_all_stock_with_jumps_mean_within_three_se(small_scenario):
    x = simulate(Policy.constant(small_scenario, 1.0), small_scenario, P, SimConfig(n_paths=200_000, seed=3))
    assert abs(x.mean() - full_equity_mean(small_scenario, P.mu)) <= 3 * standard_error(x)


def test_period_return_distribution():
    # one period, unit wealth, full equity: the sample is exp of a jump-diffusion increment
    sc = Scenario(T=1.0, M=1, q=1.0, W0=0.0)
    x = simulate(Policy.constant(sc, 1.0), sc, P, SimConfig(n_paths=400_000, seed=11))
    assert abs(x.mean() - math.exp(P.mu)) <= 3 * standard_error(x)


def test_prefix_reproducibility(small_scenario):
    pol = Policy.constant(small_scenario, 0.6)
    a = simulate(pol, small_scenario, P, SimConfig(n_paths=5000, seed=99, block_size=1024))
    b = simulate(pol, small_scenario, P, SimConfig(n_paths=3000, seed=99, block_size=1024))
    np.testing.assert_array_equal(a[:3000], b)
    c = simulate(pol, small_scenario, P, SimConfig(n_paths=5000, seed=99, block_size=1024))
    np.testing.assert_array_equal(a, c)
    d = simulate(pol, small_scenario, P, SimConfig(n_paths=5000, seed=100, block_size=1024))
    assert not np.array_equal(a, d)


def test_antithetic_pairs_share_jumps():
    sc = Scenario(T=1.0, M=1, q=1.0, W0=0.0)
    p = P.replace(lam=0.0)
    cfg = SimConfig(n_paths=64, seed=5, block_size=64, antithetic=True)
    x = np.log(simulate(Policy.constant(sc, 1.0), sc, p, cfg))
    drift = p.mu - 0.5 * p.sigma**2
    np.testing.assert_allclose(x[:32] - drift, -(x[32:] - drift), atol=1e-12)
    with pytest.raises(ValueError):
        SimConfig(antithetic=True, block_size=3)


def test_nonnegative_wealth(small_scenario, rng):
    u = rng.uniform(0, 1, size=(small_scenario.M, 5))
    pol = Policy(small_scenario.times, np.geomspace(1e3, 1e7, 5), u)
    x = simulate(pol, small_scenario, P, SimConfig(n_paths=20_000, seed=1))
    assert np.all(x >= 0)


def test_policy_must_cover_horizon(small_scenario):
    pol = Policy.constant(Scenario(T=2.0, M=2, q=1.0), 0.0)
    with pytest.raises(ValueError):
        simulate(pol, small_scenario, P, SimConfig(n_paths=10))


def test_histogram_normalization(rng):
    x = rng.lognormal(12, 0.5, 10_000)
    centers, dens = histogram(x, 5.0e3)
    assert dens.sum() * 5.0e3 == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(np.diff(centers), 5.0e3)
    c, d = histogram(np.full(10, 7.0), 2.0)
    assert c.size == 1 and d[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        histogram([], 1.0)
    with pytest.raises(ValueError):
        histogram(x, 0.0)


def test_samples_round_trip(tmp_path, rng):
    x = rng.normal(size=1001)
    path = tmp_path / "s.bin"
    write_samples(str(path), x)
    assert path.stat().st_size == 8 * 1001
    np.testing.assert_array_equal(read_samples(str(path)), x)


def test_standard_error():
    assert standard_error([1.0]) == 0.0
    x = np.arange(10.0)
    assert standard_error(x) == pytest.approx(x.std(ddof=1) / math.sqrt(10))


def test_dp_expectation_matches_simulation(small_lattice, small_scenario, small_ops):
    spec = RiskSpec.cvar(0.05, 1.0)
    sol = precommit.solve(spec, small_scenario, small_lattice, P, DensityConfig(12, 1.0), ops=small_ops)
    stats_, x = evaluate(sol.policy, small_scenario, P, SimConfig(n_paths=200_000, seed=2), 0.05, 0.0)
    se = standard_error(x)
    # grid-level discretization on this coarse lattice is well under one percent
    assert abs(stats_.mean - sol.expected_terminal_wealth) <= 3 * se + 5e-3 * stats_.mean
    assert stats_.n_paths == 200_000


def test_ks_single_period_gbm():
    # no jumps: the simulated log return is exactly normal
    sc = Scenario(T=1.0, M=1, q=1.0, W0=0.0)
    p = P.replace(lam=0.0)
    x = np.log(simulate(Policy.constant(sc, 1.0), sc, p, SimConfig(n_paths=100_000, seed=4)))
    d = p.mu - 0.5 * p.sigma**2
    assert stats.kstest(x, "norm", args=(d, p.sigma)).pvalue > 0.01
