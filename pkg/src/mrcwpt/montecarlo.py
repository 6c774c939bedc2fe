"""Monte Carlo oracle for the outage analysis.

Trials are split into fixed-size blocks. Block ``k`` draws from its own
generator spawned from ``SeedSequence(seed)``, and block results are reduced
in block order, so estimates do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List

import numpy as np

from .circuit import (ReceiverPlacement, SystemParams, alignment_factor,
                      harvested_power_loose, typical_power)
from .stochastic import OutageQuery

ANGLE_MODES = ("exact", "unit")
TYPICAL_MODES = ("fixed", "uniform")


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``angle_mode="exact"`` draws one transmitter angle per trial and an
    independent angle per receiver, both uniform on [0, 2pi). ``"unit"``
    fixes every interfering receiver's alignment to 1.
    ``typical_mode`` selects a fixed typical-receiver distance or one drawn
    uniformly in the cell.
    """

    trials: int = 100_000
    seed: int = 0
    angle_mode: str = "unit"
    typical_mode: str = "fixed"
    block_size: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1 or self.block_size < 1 or self.workers < 1:
            raise ValueError("trials, block_size and workers must be >= 1")
        if self.angle_mode not in ANGLE_MODES:
            raise ValueError(f"angle_mode must be one of {ANGLE_MODES}")
        if self.typical_mode not in TYPICAL_MODES:
            raise ValueError(f"typical_mode must be one of {TYPICAL_MODES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


@dataclasses.dataclass(frozen=True)
class SimEstimate:
    mean: float
    standard_error: float
    trials: int


def _block_sizes(sim: SimConfig) -> List[int]:
    full, rest = divmod(sim.trials, sim.block_size)
    return [sim.block_size] * full + ([rest] if rest else [])


def run_blocks(sim: SimConfig, fn: Callable[[np.random.Generator, int], np.ndarray]):
    """Apply ``fn(rng, n)`` to every block and concatenate results in block order."""
    sizes = _block_sizes(sim)
    seeds = np.random.SeedSequence(sim.seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), n) for s, n in zip(seeds, sizes)]
    if sim.workers == 1:
        parts = [fn(rng, n) for rng, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=sim.workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    return np.concatenate(parts)


def uniform_disk_radius(rho: float, size, rng: np.random.Generator) -> np.ndarray:
    """Distances from the center of points uniform in a disk (pdf ``2v / rho^2``)."""
    return rho * np.sqrt(rng.random(size))


def sample_ppp(density: float, rho: float, rng: np.random.Generator,
               angle_mode: str = "exact", coil_constant: float = 1.0) -> List[ReceiverPlacement]:
    """One realization of the receiver PPP in the disk of radius ``rho``."""
    if density < 0 or not rho > 0:
        raise ValueError("need density >= 0 and rho > 0")
    count = rng.poisson(density * math.pi * rho ** 2)
    d = uniform_disk_radius(rho, count, rng)
    if angle_mode == "exact":
        theta_t = rng.uniform(0, 2 * math.pi)
        theta = rng.uniform(0, 2 * math.pi, count)
    elif angle_mode == "unit":
        theta_t, theta = 0.0, np.zeros(count)
    else:
        raise ValueError(f"angle_mode must be one of {ANGLE_MODES}")
    return [ReceiverPlacement.from_geometry(coil_constant, float(di), theta_t, float(ti))
            for di, ti in zip(d, theta)]


def _interference_block(density: float, rho: float, n: int, rng: np.random.Generator,
                        angle_mode: str) -> np.ndarray:
    counts = rng.poisson(density * math.pi * rho ** 2, n)
    owner = np.repeat(np.arange(n), counts)
    d = uniform_disk_radius(rho, owner.size, rng)
    if angle_mode == "exact":
        theta_t = rng.uniform(0, 2 * math.pi, n)
        theta = rng.uniform(0, 2 * math.pi, owner.size)
        weight = alignment_factor(theta_t[owner], theta) ** 2 / d ** 6
    else:
        weight = d ** -6.0
    return np.bincount(owner, weights=weight, minlength=n)


def sample_S(density: float, rho: float, angle_mode: str, rng: np.random.Generator) -> float:
    """A single draw of ``S = sum_i I_i^2 / d_i^6``."""
    if angle_mode not in ANGLE_MODES:
        raise ValueError(f"angle_mode must be one of {ANGLE_MODES}")
    return float(_interference_block(density, rho, 1, rng, angle_mode)[0])


def interference_draws(density: float, rho: float, sim: SimConfig) -> np.ndarray:
    """``sim.trials`` independent draws of ``S``."""
    return run_blocks(sim, lambda rng, n: _interference_block(density, rho, n, rng,
                                                             sim.angle_mode))


def _estimate(indicator: np.ndarray) -> SimEstimate:
    n = indicator.size
    p = float(np.mean(indicator))
    return SimEstimate(p, math.sqrt(p * (1 - p) / n), n)


def empirical_characteristic_fn(t: float, density: float, rho: float, sim: SimConfig):
    """Sample mean of ``exp(j t S)`` with standard errors of its real and imaginary parts."""
    z = np.exp(1j * t * interference_draws(density, rho, sim))
    n = z.size
    se = (float(np.std(z.real, ddof=1) / math.sqrt(n)), float(np.std(z.imag, ddof=1) / math.sqrt(n)))
    return complex(np.mean(z)), se


def simulate_outage_strong(params: SystemParams, q: OutageQuery, sim: SimConfig) -> SimEstimate:
    """Fraction of trials where the typical receiver's power falls below ``q.threshold``."""
    rho = params.cell_radius

    def block(rng, n):
        s = _interference_block(params.density, rho, n, rng, sim.angle_mode)
        if sim.typical_mode == "uniform":
            d0 = uniform_disk_radius(rho, n, rng)
            p = typical_power(params, q.alignment, d0, q.load, s)
        else:
            p = typical_power(params, q.alignment, q.distance, q.load, s)
        return np.atleast_1d(p) < q.threshold

    return _estimate(run_blocks(sim, block))


def simulate_outage_loose(params: SystemParams, q: OutageQuery, sim: SimConfig) -> SimEstimate:
    """Loosely coupled outage with the typical receiver uniform in the cell.

    ``q.distance`` and ``sim.typical_mode`` are ignored.
    """
    e = params.coil_constant

    def block(rng, n):
        d0 = uniform_disk_radius(params.cell_radius, n, rng)
        m0 = e * q.alignment / d0 ** 3
        return harvested_power_loose(params, m0, np.full(n, q.load)) < q.threshold

    return _estimate(run_blocks(sim, block))
