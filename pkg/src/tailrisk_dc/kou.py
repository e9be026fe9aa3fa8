"""Kou double-exponential jump-diffusion.

Jump log-size density, compensator, the series form of the one-period
log-price transition density and exact simulation of period log returns.

The transition density ``g`` returned here is the density of the *negative*
log increment, i.e. ``g(y_n - y_l)`` weights the move from node ``y_n`` to
node ``y_l`` in the backward convolution.  ``tests/test_kou.py`` checks the
convention against simulated increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Forward recursion for Hh_k(x) loses accuracy for large positive x
# (Hh_k is the minimal solution there); above this cut we integrate.
HH_RECURSION_CUT = 3.0
_HH_QUAD_NODES = 240


@dataclass(frozen=True)
class ModelParams:
    """Real (inflation-adjusted) asset dynamics, all rates per year."""

    mu: float
    sigma: float
    lam: float
    p_up: float
    eta1: float
    eta2: float
    r: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lam < 0:
            raise ValueError(f"jump intensity must be >= 0, got {self.lam}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ValueError(f"p_up must lie in [0, 1], got {self.p_up}")
        if not self.eta1 > 1.0:
            raise ValueError(f"eta1 must exceed 1, got {self.eta1}")
        if not self.eta2 > 0.0:
            raise ValueError(f"eta2 must be positive, got {self.eta2}")

    @property
    def kappa(self) -> float:
        return compensator_kappa(self)

    def replace(self, **changes) -> "ModelParams":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return ModelParams(**fields)


# Calibrated real-terms parameters (CRSP VWD index, 3-month T-bill).
PAPER_PARAMS = ModelParams(
    mu=0.0874, sigma=0.1452, lam=0.3483, p_up=0.2903, eta1=4.7941, eta2=5.4349, r=0.00623
)


@dataclass(frozen=True)
class DensityConfig:
    n_terms: int = 12
    dt: float = 1.0

    def __post_init__(self):
        if self.n_terms < 0:
            raise ValueError("n_terms must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def jump_log_pdf(params: ModelParams, zeta):
    """Density of the log jump size; scalar or array input."""
    z = np.asarray(zeta, dtype=float)
    with np.errstate(over="ignore"):
        up = params.p_up * params.eta1 * np.exp(-params.eta1 * np.where(z >= 0, z, 0.0))
        down = (1.0 - params.p_up) * params.eta2 * np.exp(params.eta2 * np.where(z < 0, z, 0.0))
    out = np.where(z >= 0, up, down)
    return out if out.ndim else float(out)


def compensator_kappa(params: ModelParams) -> float:
    """E[xi - 1] for the jump multiplier xi = exp(zeta)."""
    if params.eta1 <= 1.0:
        raise ValueError("kappa is infinite for eta1 <= 1")
    p, e1, e2 = params.p_up, params.eta1, params.eta2
    return p * e1 / (e1 - 1.0) + (1.0 - p) * e2 / (e2 + 1.0) - 1.0


def _hh_scaled_quadrature(kmax: int, x: np.ndarray) -> np.ndarray:
    """exp(x^2/2) * Hh_k(x) for k = 1..kmax and x > 0.

    Uses Hh_k(x) = exp(-x^2/2)/k! * int_0^inf t^k exp(-x t - t^2/2) dt and the
    substitution s = x t, integrated with fixed Gauss-Legendre on [0, S].
    """
    upper = 80.0 + 4.0 * kmax
    nodes, weights = np.polynomial.legendre.leggauss(_HH_QUAD_NODES)
    s = 0.5 * upper * (nodes + 1.0)
    ws = 0.5 * upper * weights
    base = np.exp(-s[None, :] - s[None, :] ** 2 / (2.0 * x[:, None] ** 2))
    out = np.empty((kmax, x.size))
    log_s = np.log(s)
    for k in range(1, kmax + 1):
        integral = base @ (ws * np.exp(k * log_s - math.lgamma(k + 1)))
        out[k - 1] = integral / x ** (k + 1)
    return out


def _hh_table(kmax: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Table of Hh_k(x), k = -1..kmax, in split form.

    Returns ``(h, shift)`` with ``Hh_k(x) = h[k + 1] * exp(-shift)``;
    ``shift`` is 0 where the forward recursion is used and x^2/2 elsewhere.
    """
    x = np.asarray(x, dtype=float).ravel()
    h = np.empty((kmax + 2, x.size))
    shift = np.zeros(x.size)

    lo = x <= HH_RECURSION_CUT
    xl = x[lo]
    # np.longdouble keeps the (mildly unstable) region 0 < x <= cut accurate
    xe = xl.astype(np.longdouble)
    prev2 = np.exp(-xe * xe / 2)
    prev1 = (np.sqrt(np.longdouble(np.pi) / 2) * special.erfc(xl / math.sqrt(2.0))).astype(np.longdouble)
    h[0, lo] = prev2
    if kmax >= 0:
        h[1, lo] = prev1
    for k in range(1, kmax + 1):
        cur = (prev2 - xe * prev1) / k
        h[k + 1, lo] = cur
        prev2, prev1 = prev1, cur

    hi = ~lo
    if hi.any():
        xh = x[hi]
        shift[hi] = 0.5 * xh * xh
        h[0, hi] = 1.0
        if kmax >= 0:
            h[1, hi] = math.sqrt(math.pi / 2.0) * special.erfcx(xh / math.sqrt(2.0))
        if kmax >= 1:
            h[2:, hi] = _hh_scaled_quadrature(kmax, xh)
    return h, shift


def hh(k: int, x):
    """Hh_k(x) = (1/k!) int_x^inf (z - x)^k exp(-z^2/2) dz, for k >= -1."""
    if k < -1:
        raise ValueError(f"Hh_k is defined for k >= -1, got {k}")
    xa = np.asarray(x, dtype=float)
    h, shift = _hh_table(max(k, 0), xa)
    out = (h[k + 1] * np.exp(-shift)).reshape(xa.shape)
    return out if out.ndim else float(out)


@lru_cache(maxsize=64)
def _q_coefficients_cached(ell: int, p_up: float, eta1: float, eta2: float):
    a = eta1 / (eta1 + eta2)
    c = eta2 / (eta1 + eta2)
    q = 1.0 - p_up
    Q1 = np.zeros(ell)
    Q2 = np.zeros(ell)
    for k in range(1, ell):
        s1 = s2 = 0.0
        for i in range(k, ell):
            comb = math.comb(ell - k - 1, i - k) * math.comb(ell, i)
            s1 += comb * a ** (i - k) * c ** (ell - i) * p_up**i * q ** (ell - i)
            s2 += comb * a ** (ell - i) * c ** (i - k) * p_up ** (ell - i) * q**i
        Q1[k - 1] = s1
        Q2[k - 1] = s2
    Q1[ell - 1] = p_up**ell
    Q2[ell - 1] = q**ell
    return Q1, Q2


def q_coefficients(params: ModelParams, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Mixing weights of the ell-fold double-exponential convolution.

    ``Q1[k-1]`` (``Q2[k-1]``) is the probability that the sum of ``ell`` jumps
    behaves as a Gamma(k, eta1) up-move (Gamma(k, eta2) down-move).
    """
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    Q1, Q2 = _q_coefficients_cached(ell, params.p_up, params.eta1, params.eta2)
    return Q1.copy(), Q2.copy()


def density_terms(params: ModelParams, y, cfg: DensityConfig) -> np.ndarray:
    """Series terms g_0..g_{N_g} of the transition density, shape (N_g+1, *y.shape)."""
    ya = np.asarray(y, dtype=float)
    yf = ya.ravel()
    dt, n = cfg.dt, cfg.n_terms
    c = params.sigma * math.sqrt(dt)  # sqrt(2 alpha)
    beta = (params.mu - params.lam * compensator_kappa(params) - 0.5 * params.sigma**2) * dt
    theta = -params.lam * dt
    z = (beta + yf) / c
    pref = math.exp(theta) / (c * SQRT_2PI)

    terms = np.zeros((n + 1, yf.size))
    terms[0] = pref * np.exp(-0.5 * z * z)
    if n == 0 or params.lam == 0.0:
        return terms.reshape((n + 1,) + ya.shape)

    a1 = params.eta1 * c
    a2 = params.eta2 * c
    # T1[k-1] = a1^k exp(a1 z + a1^2/2) Hh_{k-1}(a1 + z), likewise T2 with (a2, -z)
    T = []
    for a, zz in ((a1, z), (a2, -z)):
        h, shift = _hh_table(n - 1, a + zz)
        expo = a * zz + 0.5 * a * a - shift
        with np.errstate(over="ignore", under="ignore"):
            scale = np.exp(np.minimum(expo, 700.0))
            powers = a ** np.arange(1, n + 1)
            T.append(powers[:, None] * h[1 : n + 1] * scale[None, :])
    T1, T2 = T

    lam_dt = params.lam * dt
    for ell in range(1, n + 1):
        Q1, Q2 = q_coefficients(params, ell)
        weight = pref * lam_dt**ell / math.factorial(ell)
        terms[ell] = weight * (Q1 @ T1[:ell] + Q2 @ T2[:ell])
    return terms.reshape((n + 1,) + ya.shape)


def transition_density(params: ModelParams, y, cfg: DensityConfig):
    """Truncated series g(y, dt; N_g) for the negative one-period log increment."""
    g = density_terms(params, y, cfg).sum(axis=0)
    return g if g.ndim else float(g)


def truncation_bound(params: ModelParams, cfg: DensityConfig) -> float:
    """Uniform bound on |g - g(.; N_g)|."""
    lam_dt = params.lam * cfg.dt
    n1 = cfg.n_terms + 1
    return lam_dt**n1 / math.factorial(n1) / math.sqrt(2.0 * math.pi * params.sigma**2 * cfg.dt)


def sample_log_increment(params: ModelParams, dt: float, rng: np.random.Generator, size=None):
    """Exact draws of ln(S_{t+dt}/S_t): diffusion plus compound Poisson jumps.

    The sum of n i.i.d. Exp(eta) jumps is Gamma(n, 1/eta), so the jump part
    is drawn exactly from the split into up and down jump counts.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    kappa = compensator_kappa(params)
    drift = (params.mu - params.lam * kappa - 0.5 * params.sigma**2) * dt
    z = rng.standard_normal(size)
    n_jumps = rng.poisson(params.lam * dt, size)
    n_up = rng.binomial(n_jumps, params.p_up)
    n_down = n_jumps - n_up
    up = rng.gamma(np.maximum(n_up, 0), 1.0 / params.eta1) * (n_up > 0)
    down = rng.gamma(np.maximum(n_down, 0), 1.0 / params.eta2) * (n_down > 0)
    return drift + params.sigma * math.sqrt(dt) * z + up - down
