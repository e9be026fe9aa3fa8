"""Scalarized terminal payoffs and empirical tail statistics.

Wealth convention throughout: larger terminal wealth is better, so CVaR is
the mean of the *left* tail and bPoE is the size of the left tail whose mean
equals the disaster level ``D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class RiskSpec:
    """Either a Mean-bPoE (``kind="bpoe"``) or a Mean-CVaR (``kind="cvar"``) objective."""

    kind: str
    D: Optional[float] = None
    gamma_o: Optional[float] = None
    alpha: Optional[float] = None
    gamma_a: Optional[float] = None

    def __post_init__(self):
        if self.kind == "bpoe":
            if self.alpha is not None or self.gamma_a is not None:
                raise ValueError("bPoE spec takes only D and gamma_o")
            if self.D is None or not self.D > 0:
                raise ValueError("bPoE spec needs a disaster level D > 0")
            if self.gamma_o is None or not self.gamma_o > 0:
                raise ValueError("bPoE spec needs gamma_o > 0")
        elif self.kind == "cvar":
            if self.D is not None or self.gamma_o is not None:
                raise ValueError("CVaR spec takes only alpha and gamma_a")
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("CVaR spec needs alpha in (0, 1)")
            if self.gamma_a is None or not self.gamma_a > 0:
                raise ValueError("CVaR spec needs gamma_a > 0")
        else:
            raise ValueError(f"unknown risk kind {self.kind!r}")

    @classmethod
    def bpoe(cls, D: float, gamma_o: float) -> "RiskSpec":
        return cls("bpoe", D=float(D), gamma_o=float(gamma_o))

    @classmethod
    def cvar(cls, alpha: float, gamma_a: float) -> "RiskSpec":
        return cls("cvar", alpha=float(alpha), gamma_a=float(gamma_a))

    @property
    def gamma(self) -> float:
        return self.gamma_o if self.kind == "bpoe" else self.gamma_a

    @property
    def minimize(self) -> bool:
        """bPoE objectives are minimized, CVaR objectives maximized."""
        return self.kind == "bpoe"

    def with_gamma(self, gamma: float) -> "RiskSpec":
        if self.kind == "bpoe":
            return RiskSpec.bpoe(self.D, gamma)
        return RiskSpec.cvar(self.alpha, gamma)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass(frozen=True)
class WealthStats:
    mean: float
    var_alpha: float
    cvar_alpha: float
    bpoe_d: float
    p5: float
    p50: float
    p95: float
    n_paths: int

    def to_dict(self) -> dict:
        return asdict(self)


def payoff(w, W, spec: RiskSpec):
    """Terminal reward f(w, W) for wealth ``w`` and candidate threshold ``W``."""
    w = np.asarray(w, dtype=float)
    W = np.asarray(W, dtype=float)
    if spec.kind == "bpoe":
        if np.any(W <= spec.D):
            raise ValueError("bPoE threshold must exceed the disaster level D")
        out = spec.gamma_o * np.maximum(1.0 - (w - spec.D) / (W - spec.D), 0.0) - w
    else:
        out = spec.gamma_a * (W + np.minimum(w - W, 0.0) / spec.alpha) + w
    return out if out.ndim else float(out)


def _sorted(samples) -> np.ndarray:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    return x


def _tail_count(alpha: float, n: int) -> int:
    # ceil(alpha n) with slack for alpha*n landing a hair above an integer
    return min(max(math.ceil(alpha * n - 1e-9), 1), n)


def empirical_var(samples, alpha: float) -> float:
    """Lower alpha-quantile: the ceil(alpha n)-th order statistic."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    x = _sorted(samples)
    return float(x[_tail_count(alpha, x.size) - 1])


def _cvar_sorted(x: np.ndarray, alpha: float) -> float:
    n = x.size
    k = _tail_count(alpha, n)
    head = x[: k - 1].sum()
    # the k-th order statistic carries the fractional remainder of the tail
    return float((head + (alpha * n - (k - 1)) * x[k - 1]) / (alpha * n))


def empirical_cvar(samples, alpha: float) -> float:
    """Mean of the worst alpha-fraction, with the partial atom at VaR.

    Equals sup_W mean(W + min(X - W, 0) / alpha) on the empirical law.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    return _cvar_sorted(_sorted(samples), alpha)


def empirical_bpoe(samples, D: float) -> float:
    """Buffered probability that wealth falls into a tail with mean ``D``.

    Inverts alpha -> CVaR_alpha, which is continuous and nondecreasing.  The
    map alpha -> alpha * CVaR_alpha is piecewise linear with breakpoints at
    multiples of 1/n, so the root of alpha * CVaR_alpha = alpha * D is found
    exactly on the segment that brackets it.
    """
    x = _sorted(samples)
    n = x.size
    if D < x[0]:
        return 0.0
    if D >= x.mean():
        return 1.0
    # partial sums of (x_i - D): the tail mean equals D where this returns to zero
    excess = np.cumsum(x - D)
    # first k with sum_{i<=k}(x_i - D) > 0; the last zero of the curve lies in [k-1, k).
    # Taking the last zero (largest tail) matches the infimum form when samples sit at D.
    k = int(np.argmax(excess > 0.0)) + 1
    if not excess[k - 1] > 0.0:
        return 1.0  # rounding put D at the sample mean
    prev = excess[k - 2] if k >= 2 else 0.0
    step = x[k - 1] - D
    frac = min(-prev / step, 1.0) if step > 0 else 1.0
    return float(((k - 1) + frac) / n)


def bpoe_objective(samples, D: float, W: float) -> float:
    """mean(max(1 - (X - D)/(W - D), 0)) for one threshold ``W > D``."""
    if not W > D:
        raise ValueError("threshold must exceed D")
    x = np.asarray(samples, dtype=float)
    return float(np.mean(np.maximum(1.0 - (x - D) / (W - D), 0.0)))


def summarize(samples, alpha: float, D: float) -> WealthStats:
    x = _sorted(samples)
    p5, p50, p95 = np.percentile(x, [5.0, 50.0, 95.0])
    return WealthStats(
        mean=float(x.mean()),
        var_alpha=float(x[_tail_count(alpha, x.size) - 1]),
        cvar_alpha=_cvar_sorted(x, alpha),
        bpoe_d=empirical_bpoe(x, D),
        p5=float(p5),
        p50=float(p50),
        p95=float(p95),
        n_paths=int(x.size),
    )
