"""Time-consistent (equilibrium) Mean-bPoE / Mean-CVaR solver.

The threshold is re-optimized at every rebalancing time and wealth level.
The value cube over (y, b, W) is propagated backward by plugging the
equilibrium control of each wealth level into every threshold layer, so
the predecessor's threshold search still sees how its choice of W plays
out under the controls that later selves will actually use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dp_core import Policy, Scenario, StepOperators, argopt
from .kou import DensityConfig, ModelParams
from .lattice import Lattice
from .precommit import _chunk_size, extract_risk
from .risk import RiskSpec, payoff

log = logging.getLogger(__name__)

RESEED_MODES = ("equilibrium", "literal")


@dataclass
class TcSolution:
    spec: RiskSpec
    value_at_inception: float
    optimal_threshold: float
    control_at_inception: float
    expected_terminal_wealth: float
    risk_value: float
    policy: Policy
    unbounded: np.ndarray
    info: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "solver": "tcmo" if self.spec.kind == "bpoe" else "tcma",
            "spec": self.spec.to_dict(),
            "value_at_inception": self.value_at_inception,
            "optimal_threshold": self.optimal_threshold,
            "control_at_inception": self.control_at_inception,
            "expected_terminal_wealth": self.expected_terminal_wealth,
            "risk_value": self.risk_value,
            "unbounded_fraction": float(self.unbounded.mean()),
        }


def _nested_search(ops: StepOperators, V: np.ndarray, m: int, minimize: bool, chunk: int):
    """Per wealth node: best control for every threshold layer, then best layer."""
    K = V.shape[2]
    u_idx = np.empty((ops.wealth.size, K), dtype=np.int64)
    u_hat = np.empty((ops.wealth.size, K))
    for start in range(0, K, chunk):
        sl = slice(start, min(start + chunk, K))
        u_idx[:, sl], u_hat[:, sl] = ops.search(V[:, :, sl], m, minimize)
    k_star, v_star = argopt(u_hat, axis=1, minimize=minimize)
    i_star = np.take_along_axis(u_idx, k_star[:, None], axis=1)[:, 0]
    return k_star, i_star, v_star


def solve(spec: RiskSpec, scenario: Scenario, lattice: Lattice, params: ModelParams,
          density: Optional[DensityConfig] = None, ops: Optional[StepOperators] = None,
          reseed: str = "equilibrium", chunk: Optional[int] = None,
          keep_cube: bool = False) -> TcSolution:
    """Backward recursion of the lifted cube with per-node threshold re-optimization.

    ``reseed="literal"`` overwrites every threshold layer with the
    equilibrium value itself, which makes the cube W-independent after the
    first step; it exists to demonstrate that degeneracy in tests.
    """
    if reseed not in RESEED_MODES:
        raise ValueError(f"reseed must be one of {RESEED_MODES}")
    if ops is None:
        ops = StepOperators(lattice, params, scenario, density)
    W = ops.lattice.w_nodes
    if spec.kind == "bpoe" and W[0] <= spec.D:
        raise ValueError("threshold grid must lie above D for a bPoE objective")
    chunk = chunk or _chunk_size(ops)
    M, P, K = scenario.M, ops.wealth.size, W.size
    u_table = np.empty((M, P))
    w_table = np.empty((M, P))
    flags = np.zeros((M, P), dtype=bool)
    cubes = {}

    V = payoff(ops.terminal_wealth()[:, :, None], W[None, None, :], spec)
    for m in range(M - 1, -1, -1):
        V = ops.propagate(V)
        if keep_cube:
            cubes[m] = V.copy()
        k_star, i_star, v_star = _nested_search(ops, V, m, spec.minimize, chunk)
        # threshold pinned at the top of the grid: the search is unbounded there
        flags[m] = k_star == K - 1
        u_eq = np.where(flags[m], 1.0, ops.lattice.u_nodes[i_star])
        u_table[m] = u_eq
        w_table[m] = np.where(flags[m], np.inf, W[k_star])
        if reseed == "equilibrium":
            E = ops.apply_controls(V, m, u_eq)
        else:
            E = np.repeat(v_star[:, None], K, axis=1)
        if m == 0:
            p0 = ops.p_start
            value = float(E[p0, k_star[p0]])
            W0_star, u0_star = float(w_table[0, p0]), float(u_eq[p0])
            break
        V = ops.to_nodes(E, m)

    policy = Policy(scenario.times, ops.wealth, u_table, threshold=w_table, unbounded=flags,
                    meta={"solver": "tcmo" if spec.minimize else "tcma", "spec": spec.to_dict()})
    expectation = ops.track_expectation(policy)
    return TcSolution(
        spec=spec,
        value_at_inception=value,
        optimal_threshold=W0_star,
        control_at_inception=u0_star,
        expected_terminal_wealth=expectation,
        risk_value=extract_risk(value, expectation, spec),
        policy=policy,
        unbounded=flags,
        info={"cubes": cubes} if keep_cube else {},
    )


def track_expectation_tc(solution: TcSolution, ops: StepOperators) -> float:
    return ops.track_expectation(solution.policy)
