"""Harvesting-outage analysis for a typical receiver in a Poisson field of receivers.

The other receivers form a homogeneous PPP of density ``lambda`` in a disk of
radius ``rho`` around the transmitter, all with unit alignment. Their
aggregate coupling is ``S = sum_i d_i^-6``, whose characteristic function
follows from the PPP generating functional::

    phi_S(t) = exp(2 pi lambda int_0^rho (exp(j t v^-6) - 1) v dv)

The inner integral becomes ``(1/6) int_{rho^-6}^inf (exp(j t u) - 1) u^(-4/3) du``
after ``u = v^-6``; it is evaluated either through incomplete gamma
functions or by oscillatory quadrature.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Optional

import numpy as np
from scipy import special

from . import _oscillatory as osc
from .circuit import SystemParams

GAMMA_M13 = special.gamma(-1.0 / 3.0)
_SERIES_LIMIT = 8.0
_SERIES_TERMS = 64


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    """Controls for the characteristic-function and inversion integrals.

    Attributes
    ----------
    abs_tol : float
        Target absolute error on an outage probability.
    inner_rtol : float
        Relative tolerance of the inner (interference) integral when it is
        computed by oscillatory quadrature.
    inner_method : str
        ``"gamma"`` (incomplete gamma functions) or ``"oscillatory"``.
    max_intervals : int
        Maximum number of half-periods summed in either oscillatory integral.
    accelerate : bool
        Apply Wynn's epsilon algorithm to the half-period partial sums.
    order : int
        Gauss-Legendre order per half-period.
    """

    abs_tol: float = 1e-4
    inner_rtol: float = 1e-8
    inner_method: str = "gamma"
    max_intervals: int = 4000
    accelerate: bool = True
    order: int = 24

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.inner_rtol > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_intervals < 1 or self.order < 1:
            raise ValueError("max_intervals and order must be >= 1")
        if self.inner_method not in ("gamma", "oscillatory"):
            raise ValueError(f"unknown inner_method {self.inner_method!r}")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclasses.dataclass(frozen=True)
class OutageQuery:
    """Threshold, typical-receiver geometry and common load."""

    threshold: float
    alignment: float
    distance: float
    load: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("threshold must be strictly positive")
        if abs(self.alignment) > 2:
            raise ValueError("|alignment| must not exceed 2")
        if not self.distance > 0:
            raise ValueError("distance must be strictly positive")
        if not self.load > 0:
            raise ValueError("load must be strictly positive")


@dataclasses.dataclass(frozen=True)
class OutageResult:
    probability: float
    error: float
    feasible: bool
    diagnostics: dict = dataclasses.field(default_factory=dict)


# ---------------------------------------------------------------------------
# interference integral
# ---------------------------------------------------------------------------

def _upper_gamma_cf(s: float, z: np.ndarray, max_iter: int = 2000) -> np.ndarray:
    """``exp(z) z^-s Gamma(s, z)`` by modified Lentz continued fraction."""
    tiny = 1e-300
    b = z + 1.0 - s
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, max_iter + 1):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(d == 0, tiny, d)
        c = b + an / c
        c = np.where(c == 0, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            return h
    raise QuadratureError("incomplete gamma continued fraction did not converge")


def _inner_gamma(t: np.ndarray, a: float) -> np.ndarray:
    """``int_a^inf (exp(j t u) - 1) u^(-4/3) du`` for t > 0 via incomplete gamma."""
    out = np.empty(t.shape, dtype=complex)
    z = t * a
    small = z <= _SERIES_LIMIT
    if np.any(small):
        ts = t[small]
        # Lower part int_0^a (exp(jtu) - 1) u^(-4/3) du as a power series.
        zj = 1j * z[small]
        term = np.ones_like(zj)
        lower = np.zeros_like(zj)
        for k in range(1, _SERIES_TERMS):
            term = term * zj / k
            lower += term / (k - 1.0 / 3.0)
        out[small] = GAMMA_M13 * (-1j * ts) ** (1.0 / 3.0) - a ** (-1.0 / 3.0) * lower
    if np.any(~small):
        zl = -1j * z[~small]
        h = _upper_gamma_cf(-1.0 / 3.0, zl)
        out[~small] = a ** (-1.0 / 3.0) * (np.exp(-zl) * h - 3.0)
    return out


def _inner_oscillatory(t: float, a: float, quad: QuadratureConfig) -> complex:
    """Same integral as :func:`_inner_gamma` by half-period partitioning."""
    half = math.pi / t
    u1 = max(a, half * math.ceil(a / half))
    head = 0j
    if u1 > a:
        # Non-oscillatory head [a, u1], graded geometrically away from a.
        n = max(1, math.ceil(math.log2(u1 / a)))
        edges = a * (u1 / a) ** (np.arange(n + 1) / n)
        u, w = osc.panel_nodes(edges[:-1], edges[1:], quad.order)
        head = np.sum(w * np.expm1(1j * t * u) * u ** (-4.0 / 3.0))
    # Oscillatory tail of exp(jtu) u^(-4/3), minus the constant part.
    const = 3.0 * u1 ** (-1.0 / 3.0)
    partial = []
    total = 0j
    batch = 32
    estimate, err = 0j, np.inf
    for start in range(0, quad.max_intervals, batch):
        k = np.arange(start, start + batch)
        u, w = osc.panel_nodes(u1 + k * half, u1 + (k + 1) * half, quad.order)
        terms = np.sum(w * np.exp(1j * t * u) * u ** (-4.0 / 3.0), axis=1)
        sums = total + np.cumsum(terms)
        total = sums[-1]
        partial.extend(sums)
        if quad.accelerate:
            estimate, err = osc.wynn_epsilon(partial[-48:])
        else:
            estimate, err = total, abs(terms[-1])
        if err <= quad.inner_rtol * max(abs(estimate - const + head), 1e-300):
            return head + estimate - const
    raise QuadratureError(
        "inner oscillatory integral did not converge",
        {"t": t, "intervals": len(partial), "estimate": complex(head + estimate - const),
         "error": float(err)},
    )


def interference_integral(t, rho: float, quad: QuadratureConfig = DEFAULT_QUADRATURE):
    """``int_0^rho (exp(j t v^-6) - 1) v dv`` for real ``t`` (any sign)."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    a = rho ** -6.0
    out = np.zeros(t.shape, dtype=complex)
    pos = t != 0
    ta = np.abs(t[pos])
    if quad.inner_method == "gamma":
        vals = _inner_gamma(ta, a)
    else:
        vals = np.array([_inner_oscillatory(float(v), a, quad) for v in ta], dtype=complex)
    out[pos] = np.where(t[pos] > 0, vals, np.conj(vals)) / 6.0
    return out[0] if scalar else out


def characteristic_fn_S(t, density: float, rho: float,
                        quad: QuadratureConfig = DEFAULT_QUADRATURE):
    """Characteristic function ``E[exp(j t S)]`` of the interference sum.

    Only the imaginary-argument form is provided: the real-argument moment
    generating function diverges for every t > 0.
    """
    if density < 0:
        raise ValueError("density must be >= 0")
    if not rho > 0:
        raise ValueError("rho must be strictly positive")
    if density == 0:
        t = np.asarray(t, dtype=float)
        return np.ones(t.shape, dtype=complex) if t.ndim else 1 + 0j
    return np.exp(2 * math.pi * density * interference_integral(t, rho, quad))


# ---------------------------------------------------------------------------
# alignment expectation
# ---------------------------------------------------------------------------

def expected_abs_alignment(method: str = "gauss", coefficient: float = 3.0) -> float:
    """``E|I|`` for independent uniform angles, ``(4/pi^2) int_0^pi/2 sqrt(1 + c sin^2) dθ``.

    The mean stays close to one, which is what allows the interfering
    receivers' alignment to be replaced by unity. ``method`` is ``"gauss"``
    (composite Gauss-Legendre) or ``"elliptic"`` (complete elliptic integral
    of the second kind with parameter ``-c``).
    """
    if method == "elliptic":
        integral = special.ellipe(-coefficient)
    elif method == "gauss":
        edges = np.linspace(0.0, math.pi / 2, 9)
        th, w = osc.panel_nodes(edges[:-1], edges[1:], 40)
        integral = np.sum(w * np.sqrt(1.0 + coefficient * np.sin(th) ** 2))
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(4.0 / math.pi ** 2 * integral)


# ---------------------------------------------------------------------------
# outage probability
# ---------------------------------------------------------------------------

def lambda_threshold(params: SystemParams, q: OutageQuery) -> float:
    """Interference level above which the typical receiver is in outage.

    Negative values mean outage is certain even with no other receivers.
    """
    r, x, tau = params.rx_resistance, q.load, q.threshold
    own = q.alignment ** 2 / q.distance ** 6
    return (own * (params.transmit_power * x / (r + x) - tau) / tau
            - params.tx_resistance * (r + x) / (params.omega ** 2 * params.coil_constant ** 2))


def feasibility_power(params: SystemParams, q: OutageQuery) -> float:
    """Smallest transmit power for which outage is not certain."""
    r, x = params.rx_resistance, q.load
    m0 = params.coil_constant * q.alignment / q.distance ** 3
    if m0 == 0:
        return math.inf
    return q.threshold * (r + x) / x * (params.tx_resistance * (r + x)
                                        / (params.omega ** 2 * m0 ** 2) + 1)


def _gil_pelaez_tail(lam: float, density: float, rho: float, quad: QuadratureConfig):
    """``int_0^inf Im{(phi(t) - p0) exp(-j t lam)} / t dt`` with p0 = P[S = 0].

    Works in ``s = t^(1/3)`` so that the ``t^(-2/3)`` behaviour at the origin
    becomes regular. Returns ``(value, error, intervals)``.
    """
    p0 = math.exp(-math.pi * density * rho ** 2)
    half = math.pi / lam

    def integrand_s(s):
        t = s ** 3
        phi = characteristic_fn_S(t, density, rho, quad)
        return 3.0 * np.imag((phi - p0) * np.exp(-1j * t * lam)) / s

    # First half-period, graded towards s = 0.
    lo, hi = osc.graded_panels(half ** (1.0 / 3.0), 48)
    s, w = osc.panel_nodes(lo, hi, 16)
    head = float(np.sum(w * integrand_s(s)))
    s, w = osc.panel_nodes(lo, hi, 8)
    # Lower-order rerun bounds the panel discretization error (conservatively).
    disc = abs(head - float(np.sum(w * integrand_s(s))))

    partial = []
    total = head
    batch = 64
    value, err = head, math.inf
    history = []
    for start in range(1, quad.max_intervals, batch):
        k = np.arange(start, start + batch)
        s, w = osc.panel_nodes((k * half) ** (1.0 / 3.0), ((k + 1) * half) ** (1.0 / 3.0),
                               quad.order)
        terms = np.sum(w * integrand_s(s), axis=1)
        if start == 1:
            s, w = osc.panel_nodes((k * half) ** (1.0 / 3.0), ((k + 1) * half) ** (1.0 / 3.0),
                                   max(quad.order // 2, 2))
            disc += float(np.sum(np.abs(terms - np.sum(w * integrand_s(s), axis=1))))
        sums = total + np.cumsum(terms)
        total = float(sums[-1])
        partial.extend(sums)
        if quad.accelerate:
            value = float(np.real(osc.wynn_epsilon(partial[-40:])[0]))
            # Same extrapolation from a window shifted by one half-period.
            shifted = float(np.real(osc.wynn_epsilon(partial[-41:-1])[0]))
            spread = abs(value - shifted)
        else:
            value, spread = total, abs(terms[-1])
        history.append(value)
        if len(history) >= 2:
            err = max(abs(history[-1] - history[-2]), spread, 1e-15 * abs(value)) + disc
            # Stop once two consecutive batches agree to within tolerance.
            if err * 10 <= quad.abs_tol * math.pi:
                return value, err, len(partial) + 1
    raise QuadratureError(
        "Gil-Pelaez integral did not converge",
        {"intervals": len(partial) + 1, "estimate": value, "error": err, "lambda": lam},
    )


def outage_strong(params: SystemParams, q: OutageQuery,
                  quad: QuadratureConfig = DEFAULT_QUADRATURE) -> OutageResult:
    """Outage probability of the typical receiver with coupling feedback included.

    ``P[p_0 < tau] = P[S > Lambda(tau)]`` evaluated by Gil-Pelaez inversion
    of :func:`characteristic_fn_S`. The atom of ``S`` at zero (no other
    receivers in the cell) is handled in closed form so that the remaining
    integrand decays.
    """
    lam = lambda_threshold(params, q)
    density, rho = params.density, params.cell_radius
    diag = {"lambda": lam}
    if lam < 0:
        return OutageResult(1.0, 0.0, False, diag)
    p0 = math.exp(-math.pi * density * rho ** 2)
    diag["empty_cell_probability"] = p0
    if density == 0:
        return OutageResult(0.0, 0.0, True, diag)
    if lam < rho ** -6.0:
        # A non-empty cell always gives S >= rho^-6 > lambda.
        return OutageResult(1.0 - p0, 0.0, True, diag)
    value, err, intervals = _gil_pelaez_tail(lam, density, rho, quad)
    prob = (1.0 - p0) / 2.0 + value / math.pi
    err = err / math.pi
    diag.update(intervals=intervals, raw=prob)
    clamped = min(1.0, max(0.0, prob))
    if abs(clamped - prob) > max(err, quad.abs_tol):
        warnings.warn(f"outage probability {prob:.6g} clamped beyond its error estimate",
                      RuntimeWarning, stacklevel=2)
    return OutageResult(clamped, err, True, diag)


def outage_loose(params: SystemParams, q: OutageQuery) -> float:
    """Loosely coupled outage with the typical receiver uniform in the cell.

    ``q.distance`` is ignored.
    """
    # (reach / rho)^6 equals P / P_min, so the boundary P = P_min gives exactly 0.
    ratio = params.transmit_power / min_power_zero_outage(params, q)
    return min(1.0, max(0.0, 1.0 - ratio ** (1.0 / 3.0)))


def min_power_zero_outage(params: SystemParams, q: OutageQuery) -> float:
    """Transmit power at which the loosely coupled outage first reaches zero."""
    r, x = params.rx_resistance, q.load
    if q.alignment == 0:
        return math.inf
    return (params.cell_radius ** 6 * q.threshold * params.tx_resistance * (r + x) ** 2
            / (params.omega ** 2 * params.coil_constant ** 2 * q.alignment ** 2 * x))


def distance_cdf(x, rho: float):
    """CDF ``min(1, x^2 / rho^2)`` of a point uniform in a disk of radius ``rho``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("distance must be non-negative")
    out = np.minimum(1.0, x ** 2 / rho ** 2)
    return float(out) if out.ndim == 0 else out
