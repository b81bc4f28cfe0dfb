"""Composite Simpson quadrature over one period."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericalError

DEFAULT_NODES = 4096


def _sample(g: Callable, t: np.ndarray) -> np.ndarray:
    values = np.asarray(g(t), dtype=float)
    if values.shape != t.shape:
        values = np.broadcast_to(values, t.shape)
    if not np.all(np.isfinite(values)):
        bad = t[~np.isfinite(values)][0]
        raise NumericalError(f"non-finite integrand value at t={float(bad)!r}")
    return values


def integrate_period(g: Callable, T: float, nodes: int = DEFAULT_NODES) -> float:
    """Integrate ``g`` over ``[0, T]`` with composite Simpson on ``nodes`` subintervals.

    ``g`` must accept a numpy array of times and return an array of the
    same shape.
    """
    if nodes < 2 or nodes % 2:
        raise ValueError(f"nodes must be even and >= 2, got {nodes}")
    if not T > 0:
        raise ValueError(f"period must be positive, got {T}")
    t = np.linspace(0.0, T, nodes + 1)
    f = _sample(g, t)
    h = T / nodes
    return float(h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum()))


def period_mean(g: Callable, T: float, nodes: int = DEFAULT_NODES) -> float:
    return integrate_period(g, T, nodes) / T


def cumulative_simpson(g: Callable, times: np.ndarray) -> np.ndarray:
    """Running integral of ``g`` from ``times[0]`` evaluated at every entry of ``times``.

    Each interval is integrated with Simpson's rule using its midpoint, so
    the result is fourth-order accurate for smooth ``g`` regardless of the
    spacing of ``times``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise ValueError("times must be a non-empty 1-D array")
    if times.size == 1:
        return np.zeros(1)
    widths = np.diff(times)
    if np.any(widths <= 0):
        raise ValueError("times must be strictly increasing")
    ends = _sample(g, times)
    mids = _sample(g, times[:-1] + 0.5 * widths)
    pieces = widths / 6.0 * (ends[:-1] + 4.0 * mids + ends[1:])
    return np.concatenate(([0.0], np.cumsum(pieces)))
