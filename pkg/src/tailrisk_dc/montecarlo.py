"""Forward simulation of the controlled wealth process under a stored policy."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .config import SimConfig
from .dp_core import Policy, Scenario
from .kou import ModelParams, compensator_kappa
from .risk import WealthStats, summarize


def _block_increments(params: ModelParams, dt: float, rng: np.random.Generator, n: int,
                      antithetic: bool) -> np.ndarray:
    """Exact period log returns for one block; antithetic pairs share jumps and flip Z."""
    drift = (params.mu - params.lam * compensator_kappa(params) - 0.5 * params.sigma**2) * dt
    half = n // 2 if antithetic else n
    z = rng.standard_normal(half)
    if antithetic:
        z = np.concatenate([z, -z])
    n_jumps = rng.poisson(params.lam * dt, half)
    n_up = rng.binomial(n_jumps, params.p_up)
    n_down = n_jumps - n_up
    jumps = (rng.gamma(np.maximum(n_up, 1), 1.0 / params.eta1) * (n_up > 0)
             - rng.gamma(np.maximum(n_down, 1), 1.0 / params.eta2) * (n_down > 0))
    if antithetic:
        jumps = np.concatenate([jumps, jumps])
    return drift + params.sigma * math.sqrt(dt) * z + jumps


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def simulate(policy: Policy, scenario: Scenario, params: ModelParams, cfg: SimConfig) -> np.ndarray:
    """Terminal wealth of ``cfg.n_paths`` paths.

    Paths are simulated in fixed-size blocks; block ``k`` draws from its own
    substream keyed by (seed, k), so the sample does not depend on how
    blocks are scheduled.
    """
    if policy.n_times != scenario.M:
        raise ValueError("policy does not cover every rebalancing time")
    dt = scenario.dt
    bond_growth = math.exp(params.r * dt)
    out = np.empty(cfg.n_paths)
    n_blocks = -(-cfg.n_paths // cfg.block_size)
    for k in range(n_blocks):
        lo = k * cfg.block_size
        n = min(cfg.block_size, cfg.n_paths - lo)
        rng = _block_rng(cfg.seed, k)
        # draw a full block so a path's randomness does not depend on n_paths
        w = np.full(cfg.block_size, scenario.W0)
        for m in range(scenario.M):
            w = w + scenario.q[m]
            u = policy.control(m, w)
            x = _block_increments(params, dt, rng, cfg.block_size, cfg.antithetic)
            w = u * w * np.exp(x) + (1.0 - u) * w * bond_growth
        out[lo:lo + n] = w[:n]
    return out


def evaluate(policy: Policy, scenario: Scenario, params: ModelParams, cfg: SimConfig,
             alpha: float, D: float) -> tuple[WealthStats, np.ndarray]:
    samples = simulate(policy, scenario, params, cfg)
    return summarize(samples, alpha, D), samples


def standard_error(samples) -> float:
    x = np.asarray(samples, dtype=float)
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def histogram(samples, bin_width: float, origin: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Bin centres and densities (integrating to 1) on bins of width ``bin_width``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    start = math.floor(x.min() / bin_width) * bin_width if origin is None else origin
    n_bins = max(1, int(math.floor((x.max() - start) / bin_width)) + 1)
    edges = start + bin_width * np.arange(n_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    return 0.5 * (edges[:-1] + edges[1:]), counts / (x.size * bin_width)


def write_samples(path: str, samples) -> None:
    """Flat little-endian float64 stream."""
    np.asarray(samples, dtype="<f8").tofile(path)


def read_samples(path: str) -> np.ndarray:
    return np.fromfile(path, dtype="<f8")
