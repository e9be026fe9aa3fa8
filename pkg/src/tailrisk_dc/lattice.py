"""Computational grids, trapezoid weights and the interpolation rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .risk import RiskSpec

DEFAULT_ANCHORS = (1.0e5, 1.0e6, 5.0e6)
# bPoE thresholds live in the open interval W > D
BPOE_THRESHOLD_OFFSET = 1.0e-6


@dataclass(frozen=True)
class GridSpec:
    """Domain bounds and node counts.

    ``w_threshold_min=None`` means the lower threshold bound is taken from the
    risk spec (D(1 + 1e-6) for bPoE, 0 for CVaR).
    """

    y_min_dag: float
    y_min: float
    y_max: float
    y_max_dag: float
    b_max: float
    w_threshold_max: float
    n_y: int
    n_y_dag: int
    n_b: int
    n_w: int
    n_u: int
    n_policy_wealth: int = 2000
    w_threshold_min: Optional[float] = None
    spacing: str = "power"
    spacing_exponent: float = 4.0
    spacing_scale: float = 5.0e4
    anchors: tuple = DEFAULT_ANCHORS

    def __post_init__(self):
        if not self.y_min_dag < self.y_min < self.y_max < self.y_max_dag:
            raise ValueError("need y_min_dag < y_min < y_max < y_max_dag")
        if self.n_y_dag % 2:
            raise ValueError("n_y_dag must be even")
        for name in ("n_y", "n_y_dag", "n_b", "n_w", "n_u", "n_policy_wealth"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if not self.b_max > 0:
            raise ValueError("b_max must be positive")
        if self.w_threshold_min is not None and not self.w_threshold_min < self.w_threshold_max:
            raise ValueError("threshold bounds are inverted")
        if self.spacing not in ("power", "sinh"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if not self.spacing_exponent >= 1.0:
            raise ValueError("spacing_exponent must be >= 1")
        if not self.spacing_scale > 0:
            raise ValueError("spacing_scale must be positive")
        object.__setattr__(self, "anchors", tuple(float(a) for a in self.anchors))

    @classmethod
    def centered(cls, center: float, inner: float = 8.0, outer: float = 16.0, **kw) -> "GridSpec":
        """Log-asset bounds at ``center -/+ inner`` and ``center -/+ outer``."""
        return cls(
            y_min_dag=center - outer, y_min=center - inner, y_max=center + inner,
            y_max_dag=center + outer, **kw,
        )

    def replace(self, **changes) -> "GridSpec":
        d = asdict(self)
        d.update(changes)
        return GridSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anchors"] = list(self.anchors)
        return d


@dataclass(frozen=True, eq=False)
class Lattice:
    spec: GridSpec
    y_nodes: np.ndarray
    b_nodes: np.ndarray
    w_nodes: np.ndarray
    u_nodes: np.ndarray
    quad_weights: np.ndarray
    interior: np.ndarray = field(repr=False)

    @property
    def dy(self) -> float:
        return float(self.y_nodes[1] - self.y_nodes[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.y_nodes.size, self.b_nodes.size

    @property
    def below(self) -> np.ndarray:
        return self.y_nodes <= self.spec.y_min

    @property
    def above(self) -> np.ndarray:
        return self.y_nodes >= self.spec.y_max

    def wealth_nodes(self) -> np.ndarray:
        """Total wealth e^y + b at every (y, b) node."""
        return np.exp(self.y_nodes)[:, None] + self.b_nodes[None, :]

    def threshold_cell(self, W: float) -> float:
        """Width of the threshold-grid cell containing ``W``."""
        k = int(np.clip(np.searchsorted(self.w_nodes, W), 1, self.w_nodes.size - 1))
        return float(self.w_nodes[k] - self.w_nodes[k - 1])


def power_grid(lo: float, hi: float, n: int, exponent: float = 4.0,
               anchors: Sequence[float] = ()) -> np.ndarray:
    """Nodes lo + (hi - lo)(j/n)^exponent, j = 0..n, with anchors snapped in."""
    if not hi > lo:
        raise ValueError("grid bounds are inverted")
    x = lo + (hi - lo) * (np.arange(n + 1) / n) ** exponent
    return _snap_anchors(x, anchors)


def sinh_grid(lo: float, hi: float, n: int, scale: float = 5.0e4,
              anchors: Sequence[float] = ()) -> np.ndarray:
    """Nodes lo + scale * sinh(c j/n) with c chosen so the last node is ``hi``.

    Spacing is close to uniform (about scale * c / n) below ``scale`` and
    close to geometric above it, so relative resolution is roughly constant
    over the wealth range that matters.
    """
    if not hi > lo:
        raise ValueError("grid bounds are inverted")
    c = math.asinh((hi - lo) / scale)
    x = lo + scale * np.sinh(c * np.arange(n + 1) / n)
    x[-1] = hi
    return _snap_anchors(x, anchors)


def _snap_anchors(x: np.ndarray, anchors: Sequence[float]) -> np.ndarray:
    """Each anchor strictly inside the grid replaces the nearest interior node."""
    lo, hi, n = x[0], x[-1], x.size - 1
    for a in anchors:
        if lo < a < hi and n >= 2:
            j = int(np.clip(np.argmin(np.abs(x[1:-1] - a)) + 1, 1, n - 1))
            if x[j - 1] < a < x[j + 1]:
                x[j] = a
    return x


def trapezoid_weights(n_intervals: int, h: float) -> np.ndarray:
    w = np.full(n_intervals + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def threshold_bounds(spec: GridSpec, risk: Optional[RiskSpec]) -> tuple[float, float]:
    if spec.w_threshold_min is not None:
        lo = spec.w_threshold_min
    elif risk is not None and risk.kind == "bpoe":
        lo = risk.D * (1.0 + BPOE_THRESHOLD_OFFSET)
    else:
        lo = 0.0
    if risk is not None and risk.kind == "bpoe" and lo <= risk.D:
        raise ValueError("bPoE threshold grid must lie above D")
    if not lo < spec.w_threshold_max:
        raise ValueError("threshold bounds are inverted")
    return lo, spec.w_threshold_max


def spaced_grid(spec: GridSpec, lo: float, hi: float, n: int) -> np.ndarray:
    if spec.spacing == "power":
        return power_grid(lo, hi, n, spec.spacing_exponent, spec.anchors)
    return sinh_grid(lo, hi, n, spec.spacing_scale, spec.anchors)


def build(spec: GridSpec, risk: Optional[RiskSpec] = None) -> Lattice:
    y = np.linspace(spec.y_min_dag, spec.y_max_dag, spec.n_y_dag + 1)
    h = (spec.y_max_dag - spec.y_min_dag) / spec.n_y_dag
    b = spaced_grid(spec, 0.0, spec.b_max, spec.n_b)
    lo, hi = threshold_bounds(spec, risk)
    w = spaced_grid(spec, lo, hi, spec.n_w)
    u = np.linspace(0.0, 1.0, spec.n_u + 1)
    interior = (y > spec.y_min) & (y < spec.y_max)
    return Lattice(spec, y, b, w, u, trapezoid_weights(spec.n_y_dag, h), interior)


def policy_wealth_grid(lattice: Lattice, w_top: float, n: Optional[int] = None,
                       extra: Sequence[float] = ()) -> np.ndarray:
    """Geometric wealth grid from e^{y_min_dag} to ``w_top`` plus forced ``extra`` nodes."""
    n = lattice.spec.n_policy_wealth if n is None else n
    lo = math.exp(lattice.spec.y_min_dag)
    if not w_top > lo:
        raise ValueError("policy wealth grid top must exceed exp(y_min_dag)")
    w = np.geomspace(lo, w_top, n)
    extra = [float(e) for e in extra if e > 0]
    return np.unique(np.concatenate([w, extra])) if extra else w


def interp_b(values, b_nodes, b):
    """Linear in b on the grid, (b / b_max) * values[-1] beyond b_max.

    ``values`` may carry extra trailing axes after the b axis.
    """
    values = np.asarray(values, dtype=float)
    b = np.asarray(b, dtype=float)
    idx, wt = _b_weights(b_nodes, b)
    lo = np.take(values, idx[0], axis=0)
    hi = np.take(values, idx[1], axis=0)
    shape = wt[0].shape + (1,) * (values.ndim - 1)
    out = wt[0].reshape(shape) * lo + wt[1].reshape(shape) * hi
    return out if out.ndim else float(out)


def _b_weights(b_nodes: np.ndarray, b: np.ndarray):
    """Two-point stencil (indices, weights) for b, with the extrapolation rule."""
    if np.any(b < 0):
        raise ValueError("b must be >= 0")
    nb = b_nodes.size
    b_max = b_nodes[-1]
    j = np.clip(np.searchsorted(b_nodes, b, side="right") - 1, 0, nb - 2)
    t = (b - b_nodes[j]) / (b_nodes[j + 1] - b_nodes[j])
    beyond = b > b_max
    w0 = np.where(beyond, 0.0, 1.0 - t)
    w1 = np.where(beyond, b / b_max, t)
    j0 = np.where(beyond, nb - 2, j)
    return (j0, j0 + 1), (w0, w1)


def interp_w(wealth, values, w):
    """Linear interpolation of a wealth curve, clamped at both ends."""
    return np.interp(w, wealth, values)
