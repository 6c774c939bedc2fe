"""Non-cooperative load adjustment among receivers sharing one transmitter.

Each receiver picks its load in ``[x_l, x_u]`` to maximize its own harvested
power given everyone else's load. The best response has a closed form,
``sqrt(r (r + beta / gamma))`` clipped to the bounds, where ``beta`` is the
receiver's own coupling and ``gamma`` the transmitter resistance plus the
coupling reflected by all other receivers.
"""

from __future__ import annotations

import dataclasses
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .circuit import NetworkInstance, SystemParams, harvested_power

UPDATE_ORDERS = ("sequential", "simultaneous")


class EquilibriumError(RuntimeError):
    """Best-response dynamics did not converge."""

    def __init__(self, message, loads, residuals):
        super().__init__(message)
        self.loads = loads
        self.residuals = residuals


@dataclasses.dataclass(frozen=True)
class GameSpec:
    """Receivers' mutual inductances (signed), cell parameters and solver controls."""

    mutual_inductances: Tuple[float, ...]
    params: SystemParams
    tolerance: float = 1e-8
    max_sweeps: int = 1000
    order: str = "sequential"

    def __post_init__(self):
        object.__setattr__(self, "mutual_inductances",
                           tuple(float(m) for m in self.mutual_inductances))
        if len(self.mutual_inductances) == 0:
            raise ValueError("game needs at least one player")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be strictly positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.order not in UPDATE_ORDERS:
            raise ValueError(f"order must be one of {UPDATE_ORDERS}")

    @property
    def players(self) -> int:
        return len(self.mutual_inductances)

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.params.load_lower, self.params.load_upper

    def network(self, loads: Sequence[float]) -> NetworkInstance:
        return NetworkInstance(self.mutual_inductances, tuple(loads))


@dataclasses.dataclass(frozen=True)
class EquilibriumResult:
    loads: Tuple[float, ...]
    utilities: Tuple[float, ...]
    sweeps: int
    converged: bool
    residuals: Tuple[float, ...]


def interaction_terms(spec: GameSpec, i: int, loads: Sequence[float]) -> Tuple[float, float]:
    """``(beta, gamma)`` for player ``i``; ``loads[i]`` itself is ignored."""
    w2 = spec.params.omega ** 2
    r = spec.params.rx_resistance
    m = spec.mutual_inductances
    beta = w2 * m[i] ** 2
    gamma = spec.params.tx_resistance + w2 * sum(
        m[k] ** 2 / (r + loads[k]) for k in range(spec.players) if k != i)
    return beta, gamma


def unconstrained_optimum(beta: float, gamma: float, r: float) -> float:
    """Stationary point ``sqrt(r (r + beta / gamma))`` of the single-player utility."""
    return math.sqrt(r * (r + beta / gamma))


def best_response(spec: GameSpec, i: int, loads: Sequence[float]) -> float:
    beta, gamma = interaction_terms(spec, i, loads)
    lo, hi = spec.bounds
    return min(hi, max(lo, unconstrained_optimum(beta, gamma, spec.params.rx_resistance)))


def utilities(spec: GameSpec, loads: Sequence[float]) -> np.ndarray:
    return harvested_power(spec.params, spec.network(loads))


def _residuals(spec: GameSpec, loads: List[float]) -> Tuple[float, ...]:
    return tuple(abs(loads[i] - best_response(spec, i, loads)) for i in range(spec.players))


def solve_equilibrium(spec: GameSpec,
                      initial: Optional[Sequence[float]] = None) -> EquilibriumResult:
    """Iterate best responses until no load moves by more than ``spec.tolerance``.

    Sequential mode updates players in index order within a sweep;
    simultaneous mode updates all players from the previous sweep's loads.
    Raises :class:`EquilibriumError` if ``max_sweeps`` is exhausted.
    """
    lo, hi = spec.bounds
    loads = [lo] * spec.players if initial is None else [float(v) for v in initial]
    if len(loads) != spec.players:
        raise ValueError("initial loads must have one entry per player")
    if any(not lo <= v <= hi for v in loads):
        raise ValueError("initial loads must lie within the load bounds")

    for sweep in range(1, spec.max_sweeps + 1):
        change = 0.0
        if spec.order == "sequential":
            for i in range(spec.players):
                new = best_response(spec, i, loads)
                change = max(change, abs(new - loads[i]))
                loads[i] = new
        else:
            new_loads = [best_response(spec, i, loads) for i in range(spec.players)]
            change = max(abs(a - b) for a, b in zip(new_loads, loads))
            loads = new_loads
        if change < spec.tolerance:
            return EquilibriumResult(tuple(loads), tuple(utilities(spec, loads)), sweep,
                                     True, _residuals(spec, loads))
    raise EquilibriumError(f"no equilibrium within {spec.max_sweeps} sweeps",
                           tuple(loads), _residuals(spec, loads))


# ---------------------------------------------------------------------------
# standard-function checks
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class StandardFunctionReport:
    """Outcome of :func:`verify_standard_function`.

    ``violations`` lists ``(property, witness)`` pairs; an empty list means
    every property held on the probe grid.
    """

    optimum: float
    positive: bool = True
    unimodal: bool = True
    scalable: bool = True
    derivative_consistent: bool = True
    violations: list = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def utility_derivative(x, alpha: float, beta: float, gamma: float, r: float):
    """Closed-form derivative of ``alpha x / (beta (r + x) + gamma (r + x)^2)``."""
    x = np.asarray(x, dtype=float)
    return (alpha * (beta * r + gamma * r ** 2 - gamma * x ** 2)
            / ((r + x) ** 2 * (beta + gamma * r + gamma * x) ** 2))


def verify_standard_function(spec: GameSpec, i: int, loads: Sequence[float],
                             grid: Sequence[float],
                             scales: Sequence[float] = (1.1, 2.0, 10.0)) -> StandardFunctionReport:
    """Check positivity, unimodality and scalability of player ``i``'s utility on ``grid``.

    The utility is evaluated through :func:`mrcwpt.circuit.harvested_power`
    with only ``x_i`` varied. Its derivative formula is checked against
    centered finite differences at interior grid points.
    """
    grid = np.sort(np.asarray(grid, dtype=float))
    if np.any(grid <= 0):
        raise ValueError("probe grid must be strictly positive")
    r = spec.params.rx_resistance
    beta, gamma = interaction_terms(spec, i, loads)
    alpha = spec.params.transmit_power * beta
    xi = unconstrained_optimum(beta, gamma, r)
    base = list(loads)

    def f(x):
        base[i] = float(x)
        return harvested_power(spec.params, spec.network(base), i)

    fx = np.array([f(x) for x in grid])
    report = StandardFunctionReport(optimum=xi)

    bad = np.flatnonzero(fx <= 0)
    if bad.size:
        report.positive = False
        report.violations.append(("positivity", float(grid[bad[0]])))

    f_opt = f(xi)
    diffs = np.diff(fx)
    mids = (grid[1:] + grid[:-1]) / 2
    # Increasing below the optimum, decreasing above; compare only whole steps.
    rising = (grid[1:] <= xi) & (diffs <= 0)
    falling = (grid[:-1] >= xi) & (diffs >= 0)
    above = fx > f_opt * (1 + 1e-12)
    for name, mask, where in (("unimodality", rising, mids), ("unimodality", falling, mids),
                              ("global maximum", above, grid)):
        if np.any(mask):
            report.unimodal = False
            report.violations.append((name, float(where[np.argmax(mask)])))

    for c in scales:
        if c <= 1:
            raise ValueError("scale factors must exceed 1")
        gap = np.array([c * f(x) - f(c * x) for x in grid])
        if np.any(gap <= 0):
            report.scalable = False
            report.violations.append(("scalability", (float(c), float(grid[np.argmax(gap <= 0)]))))

    interior = grid[1:-1]
    if interior.size:
        h = 1e-6 * interior
        fd = np.array([(f(x + dx) - f(x - dx)) / (2 * dx) for x, dx in zip(interior, h)])
        exact = utility_derivative(interior, alpha, beta, gamma, r)
        scale = np.max(np.abs(exact))
        off = np.abs(fd - exact) > 1e-6 * np.maximum(np.abs(exact), 1e-3 * scale)
        if np.any(off):
            report.derivative_consistent = False
            report.violations.append(("derivative", float(interior[np.argmax(off)])))
        # Sign change of the derivative should bracket the optimum.
        sign = np.sign(exact)
        flips = np.flatnonzero(sign[:-1] > sign[1:])
        if flips.size and not interior[flips[0]] <= xi <= interior[flips[0] + 1]:
            report.unimodal = False
            report.violations.append(("derivative sign change", float(interior[flips[0]])))
    return report


def symmetric_limit_power(players: int, transmit_power: float, epsilon: float,
                          mutual_inductance: float = 1e-7, load: float = 1.0,
                          omega: float = 1e7) -> float:
    """Per-receiver power with identical receivers and both coil resistances set to ``epsilon``.

    Tends to ``transmit_power / players`` as ``epsilon`` goes to zero.
    """
    if players < 1 or not epsilon > 0:
        raise ValueError("need players >= 1 and epsilon > 0")
    params = SystemParams(transmit_power, omega, coil_constant=1.0,
                          tx_resistance=epsilon, rx_resistance=epsilon)
    net = NetworkInstance((mutual_inductance,) * players, (load,) * players)
    return harvested_power(params, net, 0)
