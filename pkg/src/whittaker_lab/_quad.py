"""Windowed trapezoid quadrature helpers shared by the evaluator modules.

All oscillation-free integrands in this package decay at least
exponentially (most decay doubly exponentially), so a plain trapezoid
rule on a generous truncated window converges geometrically in the node
count.  The helpers here locate the window by probing the log-integrand
and report a refinement-based error estimate.
"""

from __future__ import annotations

import numpy as np

__all__ = ["auto_window", "trap_nodes", "trap_value", "QuadratureError"]


class QuadratureError(RuntimeError):
    """Raised when a quadrature refinement fails to converge."""


def auto_window(log_f, lo, hi, drop=42.0, probes=400, pad=1.0):
    """Locate [a, b] inside [lo, hi] where log_f stays within `drop` of its max.

    log_f : vectorized callable returning the log of |integrand|.
    Returns (a, b, fmax).  The window is padded by `pad` on both sides
    (clipped to [lo, hi]) so the trapezoid tails are safely negligible.
    """
    s = np.linspace(lo, hi, probes)
    v = np.asarray(log_f(s), dtype=float)
    v[~np.isfinite(v)] = -np.inf
    k = int(np.argmax(v))
    fmax = v[k]
    keep = v >= fmax - drop
    idx = np.nonzero(keep)[0]
    a = s[max(idx[0] - 1, 0)] - pad
    b = s[min(idx[-1] + 1, probes - 1)] + pad
    return max(a, lo), min(b, hi), fmax


def trap_nodes(a, b, n):
    """Uniform nodes and trapezoid weights on [a, b] with n nodes."""
    t = np.linspace(a, b, n)
    w = np.full(n, (b - a) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


def trap_value(f, a, b, n):
    """Trapezoid value at n nodes plus the value on the n//2 subgrid.

    Returns (value, coarse_value); |value - coarse_value| is the usual
    refinement error estimate.  n should be odd so the coarse grid is a
    strict subgrid.
    """
    t, w = trap_nodes(a, b, n)
    y = np.asarray(f(t))
    value = np.sum(w * y)
    tc = t[::2]
    yc = y[::2]
    wc = np.full(tc.shape, (b - a) / (tc.size - 1))
    wc[0] *= 0.5
    wc[-1] *= 0.5
    coarse = np.sum(wc * yc)
    return value, coarse
