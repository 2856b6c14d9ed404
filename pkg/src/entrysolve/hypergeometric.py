"""Confluent hypergeometric functions M (Kummer) and U (Tricomi).

The increasing and decreasing eigenfunctions of mean-reverting state
models reduce to M and U with first parameter a > 0 and argument z >= 0
proportional to state, which is the regime this module targets.

Evaluation strategy:
  * M: ascending series with term recurrence for |z| <= 150 (all terms
    positive when a, b, z > 0, so no cancellation), switching to the
    large-argument expansion gamma(b)/gamma(a) e^z z^(a-b) * S for larger z.
  * U: Laplace integral U(a,b,z) = gamma(a)^-1 integral_0^inf e^(-zt)
    t^(a-1) (1+t)^(b-a-1) dt, rescaled to s = z t. A generalized
    Gauss-Laguerre rule with weight s^(a-1) e^(-s) handles a >= 3 or
    z >= 0.75 at near machine precision; outside that window an adaptive
    two-piece quadrature with an endpoint-flattening substitution is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_genlaguerre

from .errors import AccuracyError

_SERIES_CAP = 500
_SERIES_EPS = 1e-16
_Z_SWITCH = 150.0
_GL_NODES = 128


def _is_nonpositive_integer(b: float) -> bool:
    return b <= 0.0 and float(b).is_integer()


@dataclass(frozen=True)
class HypergeometricArgs:
    """Argument triple (a, b, z) with the domain checks shared by M and U."""

    a: float
    b: float
    z: float

    def __post_init__(self):
        if _is_nonpositive_integer(self.b):
            raise ValueError(f"second parameter b={self.b} is a non-positive integer")
        if self.z < 0.0:
            raise ValueError(f"argument z={self.z} must be non-negative")


def _m_series(a: float, b: float, z: np.ndarray) -> np.ndarray:
    """Ascending series; supports signed z (cancellation grows with |z|)."""
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    acc = np.ones_like(z)
    for n in range(_SERIES_CAP):
        term = term * ((a + n) / ((b + n) * (n + 1.0))) * z
        acc = acc + term
        if np.all(np.abs(term) <= _SERIES_EPS * np.abs(acc)):
            return acc
    raise AccuracyError(
        f"Kummer series did not converge within {_SERIES_CAP} terms "
        f"(a={a}, b={b}, max|z|={float(np.max(np.abs(z)))})")


def _m_asymptotic(a: float, b: float, z: np.ndarray) -> np.ndarray:
    """Large positive z: M ~ gamma(b)/gamma(a) e^z z^(a-b) sum_n (b-a)_n (1-a)_n / (n! z^n)."""
    z = np.asarray(z, dtype=float)
    term = np.ones_like(z)
    acc = np.ones_like(z)
    prev = np.full_like(z, np.inf)
    for n in range(1, 60):
        term = term * ((b - a + n - 1.0) * (n - a) / n) / z
        if np.any(np.abs(term) > np.abs(prev)):
            # divergent asymptotic tail reached before convergence
            if np.any(np.abs(prev) > 1e-12 * np.abs(acc)):
                raise AccuracyError(
                    f"large-argument expansion for M stalled (a={a}, b={b})")
            break
        acc = acc + term
        if np.all(np.abs(term) <= _SERIES_EPS * np.abs(acc)):
            break
        prev = term
    lead = math.lgamma(b) - math.lgamma(a)
    return np.exp(lead + z + (a - b) * np.log(z)) * acc


def _m_vec(a: float, b: float, z) -> np.ndarray:
    """Vectorized M(a, b, z) over a float array z (signed z allowed)."""
    if _is_nonpositive_integer(b):
        raise ValueError(f"second parameter b={b} is a non-positive integer")
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    neg = z < -8.0
    big = z > _Z_SWITCH
    mid = ~(neg | big)
    if np.any(mid):
        out[mid] = _m_series(a, b, z[mid])
    if np.any(big):
        out[big] = _m_asymptotic(a, b, z[big])
    if np.any(neg):
        # reflect to a positive argument where the series has no cancellation
        out[neg] = np.exp(z[neg]) * _m_vec(b - a, b, -z[neg])
    return out


def kummer_m(args: HypergeometricArgs) -> float:
    """Kummer's function M(a, b, z) = sum_n (a)_n z^n / ((b)_n n!)."""
    return float(_m_vec(args.a, args.b, np.asarray([args.z]))[0])


@lru_cache(maxsize=64)
def _genlaguerre_rule(alpha: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    s, w = roots_genlaguerre(n, alpha)
    return s, w


def _u_prefactor(a: float, b: float, z: np.ndarray) -> np.ndarray:
    return np.exp((1.0 - b) * np.log(z) - math.lgamma(a))


def _u_scalar_quad(a: float, b: float, z: float) -> float:
    """Adaptive evaluation of the Laplace integral, accurate for all z > 0.

    Splits at s = z; the lower piece uses s = z * w^(1/a) to flatten the
    s^(a-1) weight so QUADPACK sees a smooth integrand.
    """
    pw = b - a - 1.0

    def f_low(wv: float) -> float:
        u = wv ** (1.0 / a)
        return math.exp(-z * u) * (1.0 + u) ** pw

    i1, e1 = quad(f_low, 0.0, 1.0, epsabs=1e-300, epsrel=1e-13, limit=200)
    i1 *= z ** (b - 1.0) / a

    def f_high(s: float) -> float:
        return math.exp(-s + (a - 1.0) * math.log(s)) * (z + s) ** pw

    i2, e2 = quad(f_high, z, np.inf, epsabs=1e-300, epsrel=1e-13, limit=200)
    total = i1 + i2
    if total != 0.0 and (abs(e1) + abs(e2)) > 1e-9 * abs(total):
        raise AccuracyError(
            f"adaptive quadrature for U(a={a}, b={b}, z={z}) reported "
            f"error {abs(e1) + abs(e2):.3e} against value {total:.3e}")
    return float(_u_prefactor(a, b, np.asarray(z)) * total)


def _u_vec(a: float, b: float, z) -> np.ndarray:
    """Vectorized U(a, b, z) for z > 0, a > 0."""
    if a <= 0.0:
        raise ValueError(f"first parameter a={a} must be positive")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0.0):
        raise ValueError("argument z must be positive (U diverges at z = 0 for b >= 1)")
    out = np.empty_like(z)
    fast = (a >= 3.0) | (z >= 0.75)
    if np.any(fast):
        s, w = _genlaguerre_rule(a - 1.0, _GL_NODES)
        zf = z[fast]
        vals = np.sum(w[None, :] * (zf[:, None] + s[None, :]) ** (b - a - 1.0), axis=1)
        out[fast] = _u_prefactor(a, b, zf) * vals
    slow = ~fast
    if np.any(slow):
        out[slow] = [_u_scalar_quad(a, b, float(zi)) for zi in z[slow]]
    return out


def tricomi_u(args: HypergeometricArgs) -> float:
    """Tricomi's function U(a, b, z) for a > 0, z > 0.

    Positive and strictly decreasing in z; dU/dz = -a U(a+1, b+1, z).
    """
    if args.a <= 0.0:
        raise ValueError(f"first parameter a={args.a} must be positive")
    if args.z <= 0.0:
        raise ValueError(
            f"argument z={args.z} is outside the domain (U diverges at z = 0 for b >= 1)")
    return _u_scalar_quad(args.a, args.b, args.z)
