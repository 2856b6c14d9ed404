"""Quadrature helpers on the logarithmic state axis.

Every integral in this package runs over (0, inf) against integrands that
decay like powers or exponentials of the state. Working on v = ln(x) with
composite fixed-order Gauss-Legendre panels equidistributes resolution
across scales and keeps evaluation vectorized and deterministic.

The two open-ended helpers walk fixed-width log windows toward a boundary
until contributions become negligible relative to the accumulated L1 mass.
When a hard truncation limit is supplied (numeric bases are only known on
a finite working interval) the remaining tail is estimated by geometric
extrapolation of the observed per-window decay.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import QuadratureError

# x below this is treated as the lower boundary itself
_X_FLOOR = 1e-280

_NODE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _NODE_CACHE:
        _NODE_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _NODE_CACHE[n]


def _log_panels(f: Callable, va: float, vb: float, max_width: float, nodes: int) -> float:
    """Integrate f(x) dx over x in [e^va, e^vb] with log-axis panels."""
    if vb <= va:
        return 0.0
    nseg = max(1, int(math.ceil((vb - va) / max_width)))
    edges = np.linspace(va, vb, nseg + 1)
    t, w = _gl_nodes(nodes)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    v = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    x = np.exp(v)
    vals = np.asarray(f(x), dtype=float) * x  # jacobian dx = x dv
    return float(np.sum(vals.reshape(nseg, nodes) * (half[:, None] * w[None, :])))


def fixed_panels(f: Callable, a: float, b: float, *, nodes: int = 32,
                 max_width: float = 0.5) -> float:
    """Integrate f over a finite interval [a, b], 0 < a <= b.

    A nested lower-order pass estimates the error; disagreement beyond
    1e-8 relative triggers one refinement, and persistent disagreement
    raises QuadratureError.
    """
    if not (0.0 < a <= b):
        raise ValueError(f"need 0 < a <= b, got [{a}, {b}]")
    if a == b:
        return 0.0
    va, vb = math.log(a), math.log(b)
    hi = _log_panels(f, va, vb, max_width, nodes)
    lo = _log_panels(f, va, vb, max_width, nodes // 2)
    scale = max(abs(hi), 1e-300)
    if abs(hi - lo) <= 1e-8 * scale:
        return hi
    hi2 = _log_panels(f, va, vb, max_width / 4.0, nodes)
    lo2 = _log_panels(f, va, vb, max_width / 4.0, nodes // 2)
    if abs(hi2 - lo2) <= 1e-7 * max(abs(hi2), 1e-300):
        return hi2
    raise QuadratureError(
        f"panel integral on [{a}, {b}] failed to converge "
        f"(refined disagreement {abs(hi2 - lo2):.3e})")


def _tail_estimate(last: float, prev: float, where: str) -> float:
    # geometric extrapolation of per-window contributions beyond a hard limit
    if last == 0.0:
        return 0.0
    if prev == 0.0 or abs(last) >= abs(prev):
        raise QuadratureError(
            f"cannot extrapolate non-decaying tail beyond the {where} truncation limit")
    q = abs(last) / abs(prev)
    if q > 0.9:
        raise QuadratureError(
            f"tail decay too slow (ratio {q:.3f}) beyond the {where} truncation limit")
    return last * q / (1.0 - q)


def integrate_to_zero(f: Callable, hi: float, *, limit: float | None = None,
                      rel_tol: float = 1e-12, window: float = 1.0,
                      nodes: int = 32, max_windows: int = 240) -> float:
    """Integrate f over (0, hi], walking log windows down from hi."""
    if hi <= 0.0:
        raise ValueError(f"upper endpoint must be positive, got {hi}")
    if hi <= _X_FLOOR or (limit is not None and hi <= limit):
        return 0.0
    total = 0.0
    total_abs = 0.0
    prev_w = math.inf
    calm = 0
    b = hi
    for _ in range(max_windows):
        a = b * math.exp(-window)
        truncated = limit is not None and a <= limit
        if truncated:
            a = max(a, limit)
        wk = _log_panels(f, math.log(a), math.log(b), 0.5, nodes)
        total += wk
        total_abs += abs(wk)
        if truncated:
            return total + _tail_estimate(wk, prev_w, "lower")
        if abs(wk) <= rel_tol * max(total_abs, 1e-300):
            calm += 1
            if calm >= 2:
                return total
        else:
            calm = 0
        prev_w = wk
        b = a
        if b <= _X_FLOOR:
            return total
    raise QuadratureError(
        f"integral toward the lower boundary did not converge within "
        f"{max_windows} windows below {hi}")


def integrate_to_inf(f: Callable, lo: float, *, limit: float | None = None,
                     rel_tol: float = 1e-12, window: float = 1.0,
                     nodes: int = 32, max_windows: int = 240) -> float:
    """Integrate f over [lo, inf), walking log windows up from lo."""
    if lo <= 0.0:
        raise ValueError(f"lower endpoint must be positive, got {lo}")
    if limit is not None and lo >= limit:
        return 0.0
    total = 0.0
    total_abs = 0.0
    prev_w = math.inf
    calm = 0
    grow = 0
    a = lo
    for _ in range(max_windows):
        b = a * math.exp(window)
        truncated = limit is not None and b >= limit
        if truncated:
            b = min(b, limit)
        wk = _log_panels(f, math.log(a), math.log(b), 0.5, nodes)
        total += wk
        total_abs += abs(wk)
        if truncated:
            return total + _tail_estimate(wk, prev_w, "upper")
        if abs(wk) <= rel_tol * max(total_abs, 1e-300):
            calm += 1
            if calm >= 2:
                return total
        else:
            calm = 0
        if abs(wk) > abs(prev_w) and math.isfinite(prev_w):
            grow += 1
            if grow >= 4:
                raise QuadratureError(
                    f"integrand keeps growing toward infinity above {lo}; "
                    "the payoff is not integrable against this resolvent")
        else:
            grow = 0
        prev_w = wk
        a = b
    raise QuadratureError(
        f"integral toward infinity did not converge within {max_windows} "
        f"windows above {lo}")
