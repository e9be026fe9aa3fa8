"""Glue between a RunConfig and the solvers, simulator and frontier tools."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from . import precommit, timeconsistent
from .config import RunConfig, SimConfig
from .dp_core import Policy, StepOperators, density_row
from .frontier import FrontierPoint, MatchResult, match_gamma, sweep
from .lattice import build
from .montecarlo import evaluate
from .risk import RiskSpec, WealthStats

log = logging.getLogger(__name__)

SOLVERS = {
    "pcma": ("cvar", precommit.solve),
    "pcmo": ("bpoe", precommit.solve),
    "tcma": ("cvar", timeconsistent.solve),
    "tcmo": ("bpoe", timeconsistent.solve),
}


class Runner:
    """Builds lattices and step operators for a config, reusing the density row."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._row = None

    def operators(self, risk: RiskSpec) -> StepOperators:
        lattice = build(self.cfg.grid, risk)
        if self._row is None:
            self._row = density_row(self.cfg.model, self.cfg.density, lattice.dy,
                                    lattice.y_nodes.size - 1)
        return StepOperators(lattice, self.cfg.model, self.cfg.scenario, self.cfg.density,
                             density_row_cache=self._row, comoving_bond=self.cfg.comoving_bond)

    def solve(self, kind: str, risk: Optional[RiskSpec] = None):
        if kind not in SOLVERS:
            raise ValueError(f"unknown solver {kind!r}; expected one of {sorted(SOLVERS)}")
        want, fn = SOLVERS[kind]
        risk = risk or self.cfg.risk
        if risk is None:
            raise ValueError(f"{kind} needs a risk specification")
        if risk.kind != want:
            raise ValueError(f"{kind} needs a {want} risk specification, got {risk.kind}")
        ops = self.operators(risk)
        return fn(risk, self.cfg.scenario, ops.lattice, self.cfg.model, self.cfg.density, ops=ops)

    def evaluate(self, policy: Policy, alpha: float, D: float,
                 sim: Optional[SimConfig] = None) -> tuple[WealthStats, np.ndarray]:
        return evaluate(policy, self.cfg.scenario, self.cfg.model, sim or self.cfg.sim, alpha, D)

    def frontier(self, kind: str, template: RiskSpec, gammas) -> list[FrontierPoint]:
        return sweep(template, gammas, lambda spec: self.solve(kind, spec), label=kind)

    def match_gamma(self, target_E: float, alpha: float = 0.05,
                    bracket: tuple[float, float] = (0.05, 50.0),
                    rel_tol: float = 1e-3) -> MatchResult:
        """gamma_a for which the TCMa expected terminal wealth equals ``target_E``."""
        def expectation(g):
            sol = self.solve("tcma", RiskSpec.cvar(alpha, g))
            log.info("tcma gamma=%.6g E=%.6g", g, sol.expected_terminal_wealth)
            return sol.expected_terminal_wealth
        return match_gamma(target_E, expectation, bracket=bracket, rel_tol=rel_tol)


def with_risk(cfg: RunConfig, risk: RiskSpec) -> RunConfig:
    return replace(cfg, risk=risk)
