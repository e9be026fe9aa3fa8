"""Efficient-frontier sweeps, CVaR <-> bPoE parameter maps and gamma matching."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

from .risk import RiskSpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrontierPoint:
    gamma: float
    risk: float
    expectation: float
    threshold: float
    solver: str

    def to_dict(self) -> dict:
        return asdict(self)


def map_cvar_to_bpoe(alpha: float, gamma_a: float, W_a_star: float, C_star: float) -> tuple[float, float]:
    """(D, gamma_o) sharing the Mean-CVaR optimal threshold and control."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if W_a_star < C_star:
        raise ValueError("the CVaR threshold cannot lie below the CVaR value")
    return float(C_star), float(gamma_a * (W_a_star - C_star) / alpha)


def map_bpoe_to_cvar(D: float, gamma_o: float, W_o_star: float, B_star: float) -> tuple[float, float]:
    """(alpha, gamma_a) sharing the Mean-bPoE optimal threshold and control."""
    if not W_o_star > D:
        raise ValueError("the bPoE threshold must exceed D")
    if not 0.0 < B_star < 1.0:
        raise ValueError("bPoE must lie in (0, 1) to define a CVaR level")
    return float(B_star), float(gamma_o * B_star / (W_o_star - D))


def sweep(template: RiskSpec, gammas: Sequence[float], solver: Callable[[RiskSpec], object],
          label: str = "") -> list[FrontierPoint]:
    """Solve once per gamma; ``solver`` maps a RiskSpec to a solution with
    ``risk_value``, ``expected_terminal_wealth`` and ``optimal_threshold``."""
    if any(not g > 0 for g in gammas):
        raise ValueError("gammas must be positive")
    points = []
    for g in sorted(gammas):
        sol = solver(template.with_gamma(g))
        points.append(FrontierPoint(
            gamma=float(g),
            risk=float(sol.risk_value),
            expectation=float(sol.expected_terminal_wealth),
            threshold=float(sol.optimal_threshold),
            solver=label or ("pcmo" if template.kind == "bpoe" else "pcma"),
        ))
    return points


class BracketError(ValueError):
    def __init__(self, lo, hi, e_lo, e_hi, target):
        super().__init__(f"target E={target:.6g} not bracketed: E({lo:.6g})={e_lo:.6g}, "
                         f"E({hi:.6g})={e_hi:.6g}")
        self.values = {"gamma_lo": lo, "gamma_hi": hi, "E_lo": e_lo, "E_hi": e_hi, "target": target}


@dataclass
class MatchResult:
    gamma: float
    expectation: float
    iterations: int
    history: list


def match_gamma(target_E: float, expectation_of: Callable[[float], float],
                bracket: tuple[float, float] = (0.05, 50.0), rel_tol: float = 1e-3,
                max_iter: int = 40, log_scale: bool = True) -> MatchResult:
    """Find gamma with |E(gamma) - target| <= rel_tol * target.

    Secant steps (in log gamma when ``log_scale``) safeguarded by bisection on
    a bracket that always straddles the target.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    fwd = (lambda g: math.log(g)) if log_scale else (lambda g: g)
    inv = (lambda x: math.exp(x)) if log_scale else (lambda x: x)
    history = []

    def f(g):
        e = float(expectation_of(g))
        history.append((g, e))
        return e - target_E

    f_lo, f_hi = f(lo), f(hi)
    tol = rel_tol * abs(target_E)
    if abs(f_lo) <= tol:
        return MatchResult(lo, f_lo + target_E, len(history), history)
    if abs(f_hi) <= tol:
        return MatchResult(hi, f_hi + target_E, len(history), history)
    if f_lo * f_hi > 0:
        raise BracketError(lo, hi, f_lo + target_E, f_hi + target_E, target_E)

    a, fa, b, fb = fwd(lo), f_lo, fwd(hi), f_hi
    x_prev, f_prev = a, fa
    x_cur, f_cur = b, fb
    for _ in range(max_iter):
        # secant through the two most recent points
        x_new = x_cur - f_cur * (x_cur - x_prev) / (f_cur - f_prev) if f_cur != f_prev else None
        lo_x, hi_x = min(a, b), max(a, b)
        width = hi_x - lo_x
        if width <= 1e-12 * max(1.0, abs(lo_x)):
            # E(gamma) jumps across the target; typical of coarse threshold grids
            raise RuntimeError(f"E(gamma) jumps from {fa + target_E:.6g} to {fb + target_E:.6g} "
                               f"at gamma={inv(a):.6g}; target {target_E:.6g} is not attained")
        if x_new is None or not (lo_x + 0.01 * width < x_new < hi_x - 0.01 * width):
            x_new = 0.5 * (a + b)
        f_new = f(inv(x_new))
        if abs(f_new) <= tol:
            return MatchResult(inv(x_new), f_new + target_E, len(history), history)
        if fa * f_new < 0:
            b, fb = x_new, f_new
        else:
            a, fa = x_new, f_new
        x_prev, f_prev, x_cur, f_cur = x_cur, f_cur, x_new, f_new
    raise RuntimeError(f"match_gamma did not converge in {max_iter} iterations; "
                       f"last gamma={inv(x_cur):.6g}, E={f_cur + target_E:.6g}")
