"""Circuit-level model of a single-transmitter MRC-WPT cell.

All quantities are SI. Transmit power is in watts here; decibel handling
lives in :mod:`mrcwpt.cli`.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

MU0 = 4e-7 * math.pi


@dataclasses.dataclass(frozen=True)
class CoilGeometry:
    """Turns and radii of the transmitter and receiver coils.

    Parameters
    ----------
    tx_turns : int
        Transmitter coil turns ``N``.
    tx_radius : float
        Transmitter coil radius ``A`` in meters.
    rx_turns : int
        Receiver coil turns ``n``.
    rx_radius : float
        Receiver coil radius ``a`` in meters.
    mu0 : float
        Magnetic permeability in H/m.
    """

    tx_turns: float = 200
    tx_radius: float = 0.20
    rx_turns: float = 10
    rx_radius: float = 0.05
    mu0: float = MU0

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if not getattr(self, field.name) > 0:
                raise ValueError(f"{field.name} must be strictly positive")


@dataclasses.dataclass(frozen=True)
class SystemParams:
    """Physical constants of the cell.

    ``omega`` has no default on purpose: it is never stated numerically and
    must either be supplied or calibrated (see :func:`mrcwpt.cli.calibrate_omega`).
    """

    transmit_power: float
    omega: float
    coil_constant: float
    tx_resistance: float = 1.3440
    rx_resistance: float = 0.0672
    cell_radius: float = 5.0
    density: float = 0.1
    power_threshold: float = 0.1
    load_lower: float = 0.01
    load_upper: float = 5.0

    def __post_init__(self):
        if self.transmit_power < 0:
            raise ValueError("transmit_power must be >= 0")
        if self.density < 0:
            raise ValueError("density must be >= 0")
        for name in ("omega", "coil_constant", "tx_resistance", "rx_resistance",
                     "cell_radius", "power_threshold", "load_lower"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.load_upper < self.load_lower:
            raise ValueError("load bounds must satisfy 0 < load_lower <= load_upper")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class ReceiverPlacement:
    """A receiver's geometry and the mutual inductance it induces."""

    distance: float
    rx_angle: float
    alignment: float
    mutual_inductance: float

    @classmethod
    def from_geometry(cls, e: float, distance: float, theta_t: float,
                      theta_i: float) -> "ReceiverPlacement":
        align = float(alignment_factor(theta_t, theta_i))
        return cls(distance, theta_i, align, float(mutual_inductance(e, align, distance)))


@dataclasses.dataclass(frozen=True)
class NetworkInstance:
    """A finite set of receivers given by (mutual inductance, load) pairs."""

    mutual_inductances: tuple
    loads: tuple

    def __post_init__(self):
        m = tuple(float(v) for v in self.mutual_inductances)
        x = tuple(float(v) for v in self.loads)
        if len(m) == 0:
            raise ValueError("network must contain at least one receiver")
        if len(m) != len(x):
            raise ValueError("mutual_inductances and loads differ in length")
        if any(not v > 0 for v in x):
            raise ValueError("every load must be strictly positive")
        object.__setattr__(self, "mutual_inductances", m)
        object.__setattr__(self, "loads", x)

    @property
    def size(self) -> int:
        return len(self.loads)

    def with_loads(self, loads: Sequence[float]) -> "NetworkInstance":
        return NetworkInstance(self.mutual_inductances, tuple(loads))


def coil_constant(geom: CoilGeometry) -> float:
    """Coupling constant ``e = pi mu0 N A^2 n a^2 / 4`` in H m^3."""
    return (math.pi * geom.mu0 * geom.tx_turns * geom.tx_radius ** 2
            * geom.rx_turns * geom.rx_radius ** 2 / 4)


def alignment_factor(theta_t: ArrayLike, theta_i: ArrayLike) -> ArrayLike:
    """Angular alignment ``2 sin(theta_t) sin(theta_i) + cos(theta_t) cos(theta_i)``.

    Broadcasts over numpy arrays. The result lies in [-2, 2].
    """
    return 2 * np.sin(theta_t) * np.sin(theta_i) + np.cos(theta_t) * np.cos(theta_i)


def mutual_inductance(e: float, alignment: ArrayLike, distance: ArrayLike) -> ArrayLike:
    """Dipole approximation ``M = e I / d^3``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be strictly positive")
    out = e * np.asarray(alignment, dtype=float) / d ** 3
    return float(out) if out.ndim == 0 else out


def harvested_power(params: SystemParams, net: NetworkInstance,
                    i: Optional[int] = None) -> Union[float, np.ndarray]:
    """Power delivered to receiver ``i`` (or to all receivers if ``i`` is None).

    p_i = P w^2 M_i^2 x_i (r + x_i)^-2 / (R + w^2 sum_k M_k^2 / (r + x_k))
    """
    m = np.asarray(net.mutual_inductances)
    x = np.asarray(net.loads)
    r = params.rx_resistance
    w2 = params.omega ** 2
    denom = params.tx_resistance + w2 * np.sum(m ** 2 / (r + x))
    p = params.transmit_power * w2 * m ** 2 * x / (r + x) ** 2 / denom
    if i is None:
        return p
    if not -net.size <= i < net.size:
        raise IndexError(f"receiver index {i} out of range for K={net.size}")
    return float(p[i])


def harvested_power_loose(params: SystemParams, m: ArrayLike, x: ArrayLike) -> ArrayLike:
    """Loosely coupled power, with the receivers' reflected load on the transmitter ignored."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("load must be strictly positive")
    r = params.rx_resistance
    out = (params.transmit_power * params.omega ** 2 * np.asarray(m, dtype=float) ** 2 * x
           / (params.tx_resistance * (r + x) ** 2))
    return float(out) if out.ndim == 0 else out


def typical_power(params: SystemParams, alignment: float, distance: ArrayLike, load: float,
                  interference: ArrayLike) -> ArrayLike:
    """Harvested power of a typical receiver given the other receivers' coupling sum.

    ``interference`` is ``S = sum_i I_i^2 / d_i^6`` over the other receivers
    (units m^-6). ``distance`` and ``interference`` broadcast.
    """
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("distance must be strictly positive")
    if load <= 0:
        raise ValueError("load must be strictly positive")
    s = np.asarray(interference, dtype=float)
    if np.any(s < 0):
        raise ValueError("interference sum must be non-negative")
    e = params.coil_constant
    r = params.rx_resistance
    w2 = params.omega ** 2
    own = alignment ** 2 / distance ** 6
    m0 = e * alignment / distance ** 3
    out = (params.transmit_power * w2 * m0 ** 2 * load / (r + load) ** 2
           / (params.tx_resistance + w2 / (r + load) * e ** 2 * (own + s)))
    return float(out) if out.ndim == 0 else out
