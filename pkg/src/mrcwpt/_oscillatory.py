"""Quadrature helpers for slowly decaying oscillatory integrals."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def panel_nodes(lo: np.ndarray, hi: np.ndarray, order: int):
    """Gauss-Legendre nodes/weights for each panel ``[lo[k], hi[k]]``.

    Returns arrays of shape ``(n_panels, order)``.
    """
    x, w = gauss_legendre(order)
    lo = np.asarray(lo, dtype=float)[:, None]
    width = np.asarray(hi, dtype=float)[:, None] - lo
    return lo + width * x, width * w


def graded_panels(upper: float, levels: int):
    """Panels on [0, upper] refined geometrically towards 0."""
    edges = upper * 2.0 ** -np.arange(levels + 1)
    lo = np.append(edges[1:], 0.0)
    hi = np.append(edges[:-1], edges[-1])
    return lo, hi


def wynn_epsilon(partial_sums):
    """Accelerate a sequence of partial sums with Wynn's epsilon algorithm.

    Returns ``(estimate, error)`` where ``error`` is the difference between
    the two most refined even-column estimates. Works for complex input.
    """
    s = np.asarray(partial_sums)
    n = len(s)
    if n == 0:
        raise ValueError("need at least one partial sum")
    if n < 3:
        return s[-1], abs(s[-1] - s[0]) if n > 1 else np.inf
    prev = np.zeros(n + 1, dtype=s.dtype)
    curr = s.copy()
    estimates = [s[-1]]
    for col in range(1, n):
        diff = curr[1:] - curr[:-1]
        if np.any(diff == 0):
            # Column has converged exactly at some entry.
            break
        nxt = prev[1:len(curr)] + 1.0 / diff
        prev, curr = curr, nxt
        if col % 2 == 0:
            estimates.append(curr[-1])
        if len(curr) < 2:
            break
    if len(estimates) < 2:
        return estimates[-1], abs(s[-1] - s[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])
