"""Resolvent operator R_rho applied to flow payoffs.

For a payoff h and the monotone eigenfunction pair (psi, phi) at rate
rho, the resolvent has the one-dimensional representation

    (R_rho h)(x) = W^-1 [ phi(x) I_lo(x) + psi(x) I_hi(x) ],
    I_lo(x) = integral_0^x psi h m' dz,
    I_hi(x) = integral_x^inf phi h m' dz,

with W the wronskian and m' the speed density. Its derivative drops
the boundary terms: (R_rho h)'(x) = W^-1 [ phi'(x) I_lo + psi'(x) I_hi ].

Integrals run on the log-state axis; tails are walked window by window
until they stop contributing, so payoff integrability is verified at
the first evaluation (a diverging upper tail raises QuadratureError).
"""
from __future__ import annotations

import math
from enum import Enum
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._quad import fixed_panels, integrate_to_inf, integrate_to_zero
from .diffusions import ExcessiveBasis
from .payoffs import Payoff


class Side(Enum):
    BELOW = "below"
    ABOVE = "above"


def _limits(basis: ExcessiveBasis) -> tuple:
    lo = basis.x_lo if basis.x_lo > 0.0 else None
    hi = basis.x_hi if math.isfinite(basis.x_hi) else None
    return lo, hi


def _tails(basis: ExcessiveBasis, m_prime: Callable, h, x: float) -> tuple[float, float]:
    lo_lim, hi_lim = _limits(basis)

    def f_lo(t):
        return basis.psi(t) * h(t) * m_prime(t)

    def f_hi(t):
        return basis.phi(t) * h(t) * m_prime(t)

    i_lo = integrate_to_zero(f_lo, x, limit=lo_lim)
    i_hi = integrate_to_inf(f_hi, x, limit=hi_lim)
    return i_lo, i_hi


def _check_scalar_state(x) -> float:
    if np.ndim(x) != 0:
        raise ValueError("state x must be a scalar; use resolvent_on_grid for arrays")
    x = float(x)
    if x <= 0.0:
        raise ValueError(f"state x must be positive, got {x}")
    return x


def resolvent(basis: ExcessiveBasis, m_prime: Callable, h: Payoff, x) -> float:
    """(R_rho h)(x) for a non-negative payoff h."""
    x = _check_scalar_state(x)
    i_lo, i_hi = _tails(basis, m_prime, h, x)
    return float((basis.phi(np.asarray([x]))[0] * i_lo
                  + basis.psi(np.asarray([x]))[0] * i_hi) / basis.wronskian)


def resolvent_prime(basis: ExcessiveBasis, m_prime: Callable, h: Payoff, x) -> float:
    """d/dx of (R_rho h) at x, via the derivative representation."""
    x = _check_scalar_state(x)
    i_lo, i_hi = _tails(basis, m_prime, h, x)
    return float((basis.phi_prime(np.asarray([x]))[0] * i_lo
                  + basis.psi_prime(np.asarray([x]))[0] * i_hi) / basis.wronskian)


def resolvent_split(basis: ExcessiveBasis, m_prime: Callable, h: Payoff,
                    y, side: Side, x) -> float:
    """Resolvent of h restricted below y (Side.BELOW) or above y
    (Side.ABOVE); the two sides sum to the full resolvent."""
    x = _check_scalar_state(x)
    y = _check_scalar_state(y)
    lo_lim, hi_lim = _limits(basis)

    def f_psi(t):
        return basis.psi(t) * h(t) * m_prime(t)

    def f_phi(t):
        return basis.phi(t) * h(t) * m_prime(t)

    phi_x = float(basis.phi(np.asarray([x]))[0])
    psi_x = float(basis.psi(np.asarray([x]))[0])
    if side is Side.BELOW:
        if x >= y:
            val = phi_x * integrate_to_zero(f_psi, y, limit=lo_lim)
        else:
            val = phi_x * integrate_to_zero(f_psi, x, limit=lo_lim) \
                + psi_x * fixed_panels(f_phi, x, y)
    else:
        if x < y:
            val = psi_x * integrate_to_inf(f_phi, y, limit=hi_lim)
        else:
            val = phi_x * fixed_panels(f_psi, y, x) \
                + psi_x * integrate_to_inf(f_phi, x, limit=hi_lim)
    return float(val / basis.wronskian)


def resolvent_on_grid(basis: ExcessiveBasis, m_prime: Callable, h: Payoff,
                      xs) -> tuple[np.ndarray, np.ndarray]:
    """(R_rho h) and its derivative on an ascending positive grid.

    One tail walk per end plus one panel sweep across the grid, so the
    cost is O(grid) rather than O(grid^2).

    Returns:
        (values, primes) as float arrays aligned with xs.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("xs must be a non-empty 1-D array")
    if np.any(xs <= 0.0):
        raise ValueError("grid states must be positive")
    if np.any(np.diff(xs) <= 0.0):
        raise ValueError("grid states must be strictly increasing")
    lo_lim, hi_lim = _limits(basis)

    def f_psi(t):
        return basis.psi(t) * h(t) * m_prime(t)

    def f_phi(t):
        return basis.phi(t) * h(t) * m_prime(t)

    n = xs.size
    i_lo = np.empty(n)
    i_hi = np.empty(n)
    i_lo[0] = integrate_to_zero(f_psi, xs[0], limit=lo_lim)
    for k in range(1, n):
        i_lo[k] = i_lo[k - 1] + fixed_panels(f_psi, xs[k - 1], xs[k])
    i_hi[n - 1] = integrate_to_inf(f_phi, xs[n - 1], limit=hi_lim)
    for k in range(n - 2, -1, -1):
        i_hi[k] = i_hi[k + 1] + fixed_panels(f_phi, xs[k], xs[k + 1])
    w = basis.wronskian
    values = (basis.phi(xs) * i_lo + basis.psi(xs) * i_hi) / w
    primes = (basis.phi_prime(xs) * i_lo + basis.psi_prime(xs) * i_hi) / w
    return values, primes


class _LogLogTable:
    """Positive function tabulated on a log grid, interpolated as a
    cubic spline in (ln x, ln f) with linear log-log tail extension."""

    def __init__(self, xs: np.ndarray, vals: np.ndarray):
        good = np.isfinite(vals) & (vals > 0.0)
        if np.count_nonzero(good) < 4:
            raise ValueError("too few positive values to tabulate")
        lx, lv = np.log(xs[good]), np.log(vals[good])
        self._spline = CubicSpline(lx, lv)
        self._lo, self._hi = lx[0], lx[-1]
        self._slope_lo = float(self._spline(self._lo, 1))
        self._slope_hi = float(self._spline(self._hi, 1))
        self._val_lo = float(lv[0])
        self._val_hi = float(lv[-1])

    def __call__(self, x) -> np.ndarray:
        lx = np.log(np.asarray(x, dtype=float))
        out = np.where(
            lx < self._lo, self._val_lo + self._slope_lo * (lx - self._lo),
            np.where(lx > self._hi, self._val_hi + self._slope_hi * (lx - self._hi),
                     self._spline(np.clip(lx, self._lo, self._hi))))
        return np.exp(out)


def resolvent_equation_check(basis_q: ExcessiveBasis, basis_p: ExcessiveBasis,
                             m_prime: Callable, h: Payoff, x) -> float:
    """Residual |R_q h - R_p h + (q - p) R_q(R_p h)| at x.

    The inner R_p h is tabulated on a log grid around x and
    interpolated, so the outer application is a single quadrature
    level. q must differ from p.
    """
    x = _check_scalar_state(x)
    q, p = basis_q.rho, basis_p.rho
    if q == p:
        raise ValueError("resolvent equation is degenerate at q == p")
    span = np.exp(np.linspace(math.log(x) - 9.0, math.log(x) + 9.0, 500))
    # keep the table inside the range where the basis stays well in
    # float range; beyond it the outer integrand is negligible anyway
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.abs(basis_p.psi(span)) + np.abs(basis_p.phi(span))
        ok = np.isfinite(mag) & (mag < 1e250)
    span = span[ok]
    inner_vals, _ = resolvent_on_grid(basis_p, m_prime, h, span)
    table = _LogLogTable(span, inner_vals)

    def inner(t):
        return np.asarray(table(t), dtype=float)

    rq = resolvent(basis_q, m_prime, h, x)
    rp = resolvent(basis_p, m_prime, h, x)
    lo_lim, hi_lim = _limits(basis_q)
    i_lo = integrate_to_zero(lambda t: basis_q.psi(t) * inner(t) * m_prime(t),
                             x, limit=lo_lim)
    i_hi = integrate_to_inf(lambda t: basis_q.phi(t) * inner(t) * m_prime(t),
                            x, limit=hi_lim)
    rq_rp = (float(basis_q.phi(np.asarray([x]))[0]) * i_lo
             + float(basis_q.psi(np.asarray([x]))[0]) * i_hi) / basis_q.wronskian
    return abs(rq - rp + (q - p) * rq_rp)
