"""Precommitment Mean-bPoE / Mean-CVaR solver.

For a fixed threshold the problem is a standard control problem; all
thresholds of the grid are carried through the backward pass together as
the last axis of a value cube (chunked to bound memory), and the outer
search picks the best threshold at inception.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dp_core import Policy, Scenario, StepOperators, argopt
from .kou import DensityConfig, ModelParams
from .lattice import Lattice
from .risk import RiskSpec, payoff

log = logging.getLogger(__name__)

# warn when the chosen threshold is this many cells from either end of the grid
BOUNDARY_CELLS = 2


@dataclass
class PrecommitSolution:
    spec: RiskSpec
    value_at_inception: float
    optimal_threshold: float
    expected_terminal_wealth: float
    risk_value: float
    policy: Policy
    value_by_threshold: np.ndarray
    thresholds: np.ndarray
    boundary_flag: bool = False
    info: dict = field(default_factory=dict)

    @property
    def threshold_index(self) -> int:
        return int(np.searchsorted(self.thresholds, self.optimal_threshold))

    def summary(self) -> dict:
        return {
            "solver": "pcmo" if self.spec.kind == "bpoe" else "pcma",
            "spec": self.spec.to_dict(),
            "value_at_inception": self.value_at_inception,
            "optimal_threshold": self.optimal_threshold,
            "expected_terminal_wealth": self.expected_terminal_wealth,
            "risk_value": self.risk_value,
            "boundary_flag": self.boundary_flag,
        }


def extract_risk(value: float, expectation: float, spec: RiskSpec) -> float:
    """Invert value = gamma_o * bPoE - E  or  value = gamma_a * CVaR + E."""
    if spec.kind == "bpoe":
        return (value + expectation) / spec.gamma_o
    return (value - expectation) / spec.gamma_a


def _backward(ops: StepOperators, spec: RiskSpec, W: np.ndarray, keep_policy: bool = True):
    """Backward pass for thresholds ``W``: inception values and control indices [m, p, k]."""
    sc = ops.scenario
    V = payoff(ops.terminal_wealth()[:, :, None], W[None, None, :], spec)
    idx_all = np.empty((sc.M, ops.wealth.size, W.size), dtype=np.int32) if keep_policy else None
    for m in range(sc.M - 1, -1, -1):
        V = ops.propagate(V)
        idx, best = ops.search(V, m, spec.minimize)
        if keep_policy:
            idx_all[m] = idx
        if m == 0:
            return best[ops.p_start], idx_all
        V = ops.to_nodes(best, m)
    raise AssertionError("unreachable")


def _chunk_size(ops: StepOperators, budget_bytes: float = 4.0e8) -> int:
    ny, nb = ops.shape
    per_layer = 8.0 * max(ny * nb * 3, ops.wealth.size * ops.n_controls * 2)
    return max(1, int(budget_bytes // per_layer))


def solve_inner(W_k: float, spec: RiskSpec, ops: StepOperators) -> tuple[float, Policy]:
    """Inception value and control tables for one fixed threshold."""
    value, idx = _backward(ops, spec, np.array([float(W_k)]))
    u = ops.lattice.u_nodes[idx[:, :, 0]]
    policy = Policy(ops.scenario.times, ops.wealth, u,
                    meta={"solver": "inner", "threshold": float(W_k), "spec": spec.to_dict()})
    return float(value[0]), policy


def solve(spec: RiskSpec, scenario: Scenario, lattice: Lattice, params: ModelParams,
          density: Optional[DensityConfig] = None, ops: Optional[StepOperators] = None,
          chunk: Optional[int] = None) -> PrecommitSolution:
    """Exhaustive outer search over the threshold grid with inner backward induction."""
    if ops is None:
        ops = StepOperators(lattice, params, scenario, density)
    W = ops.lattice.w_nodes
    if spec.kind == "bpoe" and W[0] <= spec.D:
        raise ValueError("threshold grid must lie above D for a bPoE objective")
    chunk = chunk or _chunk_size(ops)
    values = np.empty(W.size)
    idx_all = np.empty((scenario.M, ops.wealth.size, W.size), dtype=np.int32)
    for start in range(0, W.size, chunk):
        sl = slice(start, min(start + chunk, W.size))
        values[sl], idx_all[:, :, sl] = _backward(ops, spec, W[sl])

    k_star, best = argopt(values, axis=0, minimize=spec.minimize)
    k_star = int(k_star)
    u = ops.lattice.u_nodes[idx_all[:, :, k_star]]
    policy = Policy(scenario.times, ops.wealth, u,
                    meta={"solver": "pcmo" if spec.minimize else "pcma",
                          "threshold": float(W[k_star]), "spec": spec.to_dict()})
    expectation = ops.track_expectation(policy)
    flag = k_star < BOUNDARY_CELLS or k_star > W.size - 1 - BOUNDARY_CELLS
    if flag:
        log.warning("optimal threshold %.6g sits on the edge of the threshold grid", W[k_star])
    return PrecommitSolution(
        spec=spec,
        value_at_inception=float(best),
        optimal_threshold=float(W[k_star]),
        expected_terminal_wealth=expectation,
        risk_value=extract_risk(float(best), expectation, spec),
        policy=policy,
        value_by_threshold=values,
        thresholds=W.copy(),
        boundary_flag=bool(flag),
    )
