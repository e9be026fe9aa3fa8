"""Building blocks of the backward recursion.

Every step is a fixed linear operator on arrays indexed ``(y, b)`` or
``(y, b, W)``; the only nonlinear part is the search over controls.

* settlement: dense ``(n_b+1) x (n_b+1)`` interpolation matrix acting on b
* convolution: dense ``(n_y+1) x (n_y+1)`` matrix (trapezoid weights times
  density rows on interior nodes, copy / growth rows on the boundary bands)
* rebalance: sparse bilinear gather from ``(y, b)`` nodes to
  ``(wealth, control)`` pairs, followed by a search over controls
* map back: sparse linear interpolation from the wealth grid to ``(y, b)``
  nodes at wealth e^y + b + q.

Value slices and cubes are plain numpy arrays with the y axis first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .kou import DensityConfig, ModelParams, transition_density
from .lattice import Lattice, _b_weights, policy_wealth_grid
from .risk import RiskSpec, payoff

# relative tolerance for treating two candidate values as tied
TIE_TOL = 1.0e-12


@dataclass(frozen=True)
class Scenario:
    T: float
    M: int
    q: tuple
    W0: float = 0.0

    def __post_init__(self):
        q = tuple(float(x) for x in np.broadcast_to(np.asarray(self.q, dtype=float), (self.M,)))
        object.__setattr__(self, "q", q)
        if self.M < 1:
            raise ValueError("need at least one rebalancing time")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if any(x < 0 for x in q):
            raise ValueError("cashflows must be nonnegative")
        if self.W0 < 0:
            raise ValueError("initial wealth must be nonnegative")
        if not self.W0 + q[0] > 0:
            raise ValueError("W0 + q[0] must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M) * self.dt

    @property
    def w_start(self) -> float:
        """Wealth at the first rebalance, after the first cashflow."""
        return self.W0 + self.q[0]

    def to_dict(self) -> dict:
        return {"T": self.T, "M": self.M, "q": list(self.q), "W0": self.W0}


def cash_only_wealth(scenario: Scenario, r: float) -> float:
    """Terminal wealth when everything stays in the bond."""
    t = scenario.times
    return scenario.W0 * math.exp(r * scenario.T) + float(
        np.sum(np.asarray(scenario.q) * np.exp(r * (scenario.T - t))))


def full_equity_mean(scenario: Scenario, mu: float) -> float:
    """Expected terminal wealth with everything in the risky asset."""
    return cash_only_wealth(scenario, mu)


@dataclass
class Policy:
    """Per-rebalance control tables on a shared wealth grid."""

    times: np.ndarray
    wealth: np.ndarray
    u: np.ndarray
    threshold: Optional[np.ndarray] = None
    unbounded: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.wealth = np.asarray(self.wealth, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (self.times.size, self.wealth.size):
            raise ValueError("control table must have shape (n_times, n_wealth)")
        if np.any(np.diff(self.wealth) <= 0):
            raise ValueError("policy wealth nodes must be strictly increasing")
        if np.any((self.u < 0) | (self.u > 1)):
            raise ValueError("controls must lie in [0, 1]")

    @property
    def n_times(self) -> int:
        return self.times.size

    def control(self, m: int, w):
        """u*_m(w), linear in w and clamped to the end nodes."""
        return np.clip(np.interp(w, self.wealth, self.u[m]), 0.0, 1.0)

    @classmethod
    def constant(cls, scenario: Scenario, u: float, wealth=None) -> "Policy":
        wealth = np.array([1.0, 2.0]) if wealth is None else np.asarray(wealth, dtype=float)
        table = np.full((scenario.M, wealth.size), float(u))
        return cls(scenario.times, wealth, table, meta={"kind": "constant", "u": float(u)})


def terminal_condition(W, spec: RiskSpec, lattice: Lattice) -> np.ndarray:
    """payoff(e^y + b, W) on the (y, b) nodes; a cube when ``W`` is an array."""
    w = lattice.wealth_nodes()
    W = np.asarray(W, dtype=float)
    if W.ndim == 0:
        return payoff(w, W, spec)
    return payoff(w[:, :, None], W[None, None, :], spec)


def settle_matrix(b_nodes: np.ndarray, growth: float) -> np.ndarray:
    """S with (S @ v)[j] = interp_b(v, b_j * growth)."""
    nb = b_nodes.size
    idx, wt = _b_weights(b_nodes, b_nodes * growth)
    S = np.zeros((nb, nb))
    rows = np.arange(nb)
    np.add.at(S, (rows, idx[0]), wt[0])
    np.add.at(S, (rows, idx[1]), wt[1])
    return S


def density_row(params: ModelParams, cfg: DensityConfig, dy: float, n_intervals: int) -> np.ndarray:
    """g(k dy) for k = -n..n, indexed k + n."""
    k = np.arange(-n_intervals, n_intervals + 1)
    return np.asarray(transition_density(params, k * dy, cfg))


def convolution_matrix(lattice: Lattice, params: ModelParams, cfg: DensityConfig,
                       row: Optional[np.ndarray] = None) -> np.ndarray:
    ny = lattice.y_nodes.size
    n = ny - 1
    if row is None:
        row = density_row(params, cfg, lattice.dy, n)
    if row.size != 2 * n + 1:
        raise ValueError("density row length does not match the y grid")
    i = np.arange(ny)
    K = row[(i[:, None] - i[None, :]) + n] * lattice.quad_weights[None, :]
    K[~lattice.interior] = 0.0
    below = np.flatnonzero(lattice.below)
    above = np.flatnonzero(lattice.above)
    K[below, below] = 1.0
    K[above, above] = math.exp(params.mu * cfg.dt)
    return K


def control_matrix(lattice: Lattice, wealth, u, b_nodes: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """Bilinear gather: row i evaluates a (y, b) slice at (ln(u_i w_i), (1-u_i) w_i).

    The log-asset coordinate is clamped to [y_min_dag, y_max_dag]; u = 0 sits
    on y_min_dag.  Columns index the flattened (y, b) array.
    """
    w = np.asarray(wealth, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if np.any(w <= 0):
        raise ValueError("rebalance wealth must be positive")
    y = lattice.y_nodes
    b_nodes = lattice.b_nodes if b_nodes is None else b_nodes
    nb = b_nodes.size
    s = u * w
    with np.errstate(divide="ignore"):
        ys = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), -np.inf)
    ys = np.clip(ys, y[0], y[-1])
    iy = np.clip(((ys - y[0]) / lattice.dy).astype(np.int64), 0, y.size - 2)
    # linear in the stock amount e^y between neighbouring nodes
    s_lo, s_hi = np.exp(y[iy]), np.exp(y[iy + 1])
    ty = np.clip((np.exp(ys) - s_lo) / (s_hi - s_lo), 0.0, 1.0)
    (jb0, jb1), (wb0, wb1) = _b_weights(b_nodes, np.maximum((1.0 - u) * w, 0.0))

    rows = np.repeat(np.arange(w.size), 4)
    cols = np.stack([iy * nb + jb0, iy * nb + jb1, (iy + 1) * nb + jb0, (iy + 1) * nb + jb1], 1).ravel()
    data = np.stack([(1 - ty) * wb0, (1 - ty) * wb1, ty * wb0, ty * wb1], 1).ravel()
    R = sparse.csr_matrix((data, (rows, cols)), shape=(w.size, y.size * nb))
    R.sum_duplicates()
    return R


def mapback_matrix(lattice: Lattice, wealth: np.ndarray, q: float,
                   b_nodes: Optional[np.ndarray] = None) -> sparse.csr_matrix:
    """Linear interpolation (clamped) from the wealth grid to e^y + b + q."""
    b_nodes = lattice.b_nodes if b_nodes is None else b_nodes
    target = (np.exp(lattice.y_nodes)[:, None] + b_nodes[None, :] + q).ravel()
    n = wealth.size
    t = np.clip(target, wealth[0], wealth[-1])
    k = np.clip(np.searchsorted(wealth, t, side="right") - 1, 0, n - 2)
    frac = (t - wealth[k]) / (wealth[k + 1] - wealth[k])
    rows = np.repeat(np.arange(target.size), 2)
    cols = np.stack([k, k + 1], 1).ravel()
    data = np.stack([1.0 - frac, frac], 1).ravel()
    return sparse.csr_matrix((data, (rows, cols)), shape=(target.size, n))


def argopt(values: np.ndarray, axis: int, minimize: bool) -> tuple[np.ndarray, np.ndarray]:
    """(index, optimum) along ``axis`` with ties broken toward the smallest index."""
    v = -values if minimize else values
    best = v.max(axis=axis, keepdims=True)
    tol = TIE_TOL * np.maximum(1.0, np.abs(best))
    idx = np.argmax(v >= best - tol, axis=axis)
    opt = np.take_along_axis(values, np.expand_dims(idx, axis), axis=axis)
    return idx, np.squeeze(opt, axis=axis)


class StepOperators:
    """Linear operators of the backward step for one (lattice, model, scenario).

    With ``comoving_bond=True`` the bond grid at time t is b_j e^{r t}, so
    interest settlement carries every node exactly onto a node of the next
    grid and needs no interpolation.  With ``False`` the bond grid is fixed
    and settlement interpolates at b_j e^{r dt}.
    """

    def __init__(self, lattice: Lattice, params: ModelParams, scenario: Scenario,
                 density: Optional[DensityConfig] = None, wealth: Optional[np.ndarray] = None,
                 density_row_cache: Optional[np.ndarray] = None, comoving_bond: bool = True):
        self.lattice = lattice
        self.params = params
        self.scenario = scenario
        self.comoving_bond = comoving_bond
        self.density = density or DensityConfig(dt=scenario.dt)
        if not math.isclose(self.density.dt, scenario.dt):
            raise ValueError("density dt does not match the scenario rebalancing interval")
        if wealth is None:
            spec = lattice.spec
            top = (math.exp(spec.y_max_dag) + spec.b_max * math.exp(params.r * scenario.T)
                   + sum(scenario.q))
            wealth = policy_wealth_grid(lattice, top, extra=[scenario.w_start])
        self.wealth = np.asarray(wealth, dtype=float)
        if np.any(np.diff(self.wealth) <= 0):
            raise ValueError("wealth grid must be strictly increasing")
        self.p_start = int(np.argmin(np.abs(self.wealth - scenario.w_start)))
        if not math.isclose(self.wealth[self.p_start], scenario.w_start, rel_tol=1e-12):
            raise ValueError("wealth grid must contain W0 + q0")
        growth = math.exp(params.r * scenario.dt)
        self.S = None if comoving_bond else settle_matrix(lattice.b_nodes, growth)
        self.K = convolution_matrix(lattice, params, self.density, density_row_cache)
        self._cache_m: Optional[int] = None
        self._R = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.lattice.shape

    @property
    def n_controls(self) -> int:
        return self.lattice.u_nodes.size

    def b_nodes(self, m: int) -> np.ndarray:
        """Bond grid at time t_m (m = M for the terminal time)."""
        if not self.comoving_bond:
            return self.lattice.b_nodes
        return self.lattice.b_nodes * math.exp(self.params.r * m * self.scenario.dt)

    def wealth_nodes(self, m: int) -> np.ndarray:
        return np.exp(self.lattice.y_nodes)[:, None] + self.b_nodes(m)[None, :]

    def terminal_wealth(self) -> np.ndarray:
        return self.wealth_nodes(self.scenario.M)

    def u_floor(self, m: int) -> np.ndarray:
        """Smallest control keeping the bond holding inside the localized domain."""
        return np.maximum(1.0 - self.b_nodes(m)[-1] / self.wealth, 0.0)

    def _gather_matrix(self, m: int) -> sparse.csr_matrix:
        if self._cache_m != m:
            P, U = self.wealth.size, self.n_controls
            self._R = control_matrix(self.lattice, np.repeat(self.wealth, U),
                                     np.tile(self.lattice.u_nodes, P), self.b_nodes(m))
            self._cache_m = m
        return self._R

    def settle(self, values: np.ndarray) -> np.ndarray:
        if self.S is None:
            return values
        if values.ndim == 2:
            return values @ self.S.T
        return np.matmul(self.S, values)

    def convolve(self, values: np.ndarray) -> np.ndarray:
        if values.shape[0] != self.K.shape[0]:
            raise ValueError("slice does not match the y grid")
        flat = values.reshape(values.shape[0], -1)
        return (self.K @ flat).reshape(values.shape)

    def propagate(self, values: np.ndarray) -> np.ndarray:
        """t_{m+1} -> t_m^+: settle interest, then convolve."""
        return self.convolve(self.settle(values))

    def gather(self, values: np.ndarray, m: int) -> np.ndarray:
        """Candidate values G[p, i, ...] over the wealth grid and control grid at t_m^+."""
        ny, nb = self.shape
        G = self._gather_matrix(m) @ values.reshape(ny * nb, -1)
        G = G.reshape((self.wealth.size, self.n_controls) + values.shape[2:])
        return G

    def feasible(self, m: int) -> np.ndarray:
        return self.lattice.u_nodes[None, :] >= self.u_floor(m)[:, None] - 1e-15

    def search(self, values: np.ndarray, m: int, minimize: bool) -> tuple[np.ndarray, np.ndarray]:
        """Control-index argopt and optimum on the wealth grid."""
        G = self.gather(values, m)
        ok = self.feasible(m)
        if not ok.all():
            mask = ok.reshape(ok.shape + (1,) * (G.ndim - 2))
            G = np.where(mask, G, np.inf if minimize else -np.inf)
        return argopt(G, axis=1, minimize=minimize)

    def apply_controls(self, values: np.ndarray, m: int, u: np.ndarray) -> np.ndarray:
        """Value on the wealth grid when control u[p] is used at wealth node p."""
        ny, nb = self.shape
        u = np.maximum(np.broadcast_to(u, self.wealth.shape), self.u_floor(m))
        R = control_matrix(self.lattice, self.wealth, u, self.b_nodes(m))
        out = R @ values.reshape(ny * nb, -1)
        return out.reshape((self.wealth.size,) + values.shape[2:])

    def to_nodes(self, curve: np.ndarray, m: int) -> np.ndarray:
        """Map a wealth-grid curve (or stack of curves) back to the (y, b) nodes of t_m."""
        ny, nb = self.shape
        B = mapback_matrix(self.lattice, self.wealth, self.scenario.q[m], self.b_nodes(m))
        out = B @ curve.reshape(self.wealth.size, -1)
        return out.reshape((ny, nb) + curve.shape[1:])

    def track_expectation(self, policy: Policy) -> float:
        """E[W_T] from the inception state under a stored policy."""
        if policy.n_times != self.scenario.M:
            raise ValueError("policy does not cover every rebalancing time")
        V = self.terminal_wealth()
        for m in range(self.scenario.M - 1, -1, -1):
            V = self.propagate(V)
            curve = self.apply_controls(V, m, policy.control(m, self.wealth))
            if m == 0:
                return float(curve[self.p_start])
            V = self.to_nodes(curve, m)
        raise AssertionError("unreachable")


def settle_interest(values: np.ndarray, lattice: Lattice, r: float, dt: float) -> np.ndarray:
    S = settle_matrix(lattice.b_nodes, math.exp(r * dt))
    return values @ S.T if values.ndim == 2 else np.matmul(S, values)


def convolve_step(values: np.ndarray, lattice: Lattice, params: ModelParams,
                  cfg: DensityConfig, row: Optional[np.ndarray] = None) -> np.ndarray:
    K = convolution_matrix(lattice, params, cfg, row)
    if values.shape[0] != K.shape[0]:
        raise ValueError("slice does not match the y grid")
    return (K @ values.reshape(values.shape[0], -1)).reshape(values.shape)


def rebalance(values: np.ndarray, lattice: Lattice, wealth: Sequence[float],
              minimize: bool) -> tuple[np.ndarray, np.ndarray]:
    """Best control u*(w) and optimum v*(w) for a t_m^+ slice on post-cashflow wealth ``w``."""
    wealth = np.asarray(wealth, dtype=float)
    P, U = wealth.size, lattice.u_nodes.size
    R = control_matrix(lattice, np.repeat(wealth, U), np.tile(lattice.u_nodes, P))
    G = (R @ values.ravel()).reshape(P, U)
    idx, best = argopt(G, axis=1, minimize=minimize)
    return lattice.u_nodes[idx], best
