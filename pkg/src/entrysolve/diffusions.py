"""State-process models and their monotone rho-excessive eigenfunctions.

A model is a positive 1-D diffusion dX = drift(X) dt + vol(X) dW on
(0, inf). For each discount rate rho > 0 the generator equation
A u = rho u has (up to scaling) a unique increasing solution psi and a
unique decreasing solution phi; together with the scale and speed
densities they are the raw material for resolvent and threshold
computations.

Three kinds are supported:
  * GBM: drift alpha*x, vol beta*x; psi and phi are pure powers.
  * LOGISTIC: drift alpha*x*(1 - gamma*x), vol beta*x; psi and phi
    combine a power with confluent hypergeometric factors M and U.
  * CUSTOM: arbitrary drift/vol callables; psi and phi are built
    numerically from a Riccati equation for (ln u)' on the log axis,
    shot from each end of a working interval.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConstructionError
from .hypergeometric import _m_vec, _u_vec

_DECAY_TOL = 1e-10
_SPAN_INIT = 6.0
_SPAN_STEP = 6.0
_SPAN_CAP = 30.0
_SPAN_HARD_CAP = 34.0
_SHOT_BUFFER = 2.0


class DiffusionKind(Enum):
    GBM = "gbm"
    LOGISTIC = "logistic"
    CUSTOM = "custom"


_PROBE = np.array([1e-3, 0.1, 1.0, 10.0, 1e3])


@dataclass(frozen=True)
class DiffusionSpec:
    """Parameters of a positive 1-D diffusion.

    Attributes:
        kind: GBM, LOGISTIC or CUSTOM.
        alpha: linear drift coefficient (GBM, LOGISTIC).
        beta: proportional volatility (GBM, LOGISTIC); must be > 0.
        gamma: crowding coefficient of the logistic drift; 0 reduces
            to GBM.
        custom_drift: vectorized drift callable (CUSTOM only).
        custom_vol: vectorized volatility callable (CUSTOM only),
            positive on (0, inf).
    """

    kind: DiffusionKind
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    custom_drift: Optional[Callable[[np.ndarray], np.ndarray]] = None
    custom_vol: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.kind in (DiffusionKind.GBM, DiffusionKind.LOGISTIC):
            if self.beta <= 0.0:
                raise ValueError(f"volatility beta must be positive, got {self.beta}")
            if self.custom_drift is not None or self.custom_vol is not None:
                raise ValueError(f"{self.kind.value} model does not take custom callables")
            if self.kind is DiffusionKind.GBM and self.gamma != 0.0:
                raise ValueError("GBM does not take a crowding coefficient gamma")
            if self.kind is DiffusionKind.LOGISTIC and self.gamma < 0.0:
                raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        else:
            if self.custom_drift is None or self.custom_vol is None:
                raise ValueError("CUSTOM model needs both custom_drift and custom_vol")
            v = np.asarray(self.custom_vol(_PROBE), dtype=float)
            d = np.asarray(self.custom_drift(_PROBE), dtype=float)
            if v.shape != _PROBE.shape or d.shape != _PROBE.shape:
                raise ValueError("custom drift/vol must be vectorized and preserve shape")
            if not (np.all(np.isfinite(v)) and np.all(np.isfinite(d))):
                raise ValueError("custom drift/vol take non-finite values on the probe grid")
            if np.any(v <= 0.0):
                raise ValueError("custom volatility must be positive on (0, inf)")

    def drift(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is DiffusionKind.GBM:
            return self.alpha * x
        if self.kind is DiffusionKind.LOGISTIC:
            return self.alpha * x * (1.0 - self.gamma * x)
        return np.asarray(self.custom_drift(x), dtype=float)

    def vol(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is DiffusionKind.CUSTOM:
            return np.asarray(self.custom_vol(x), dtype=float)
        return self.beta * x


def gbm(alpha: float, beta: float) -> DiffusionSpec:
    return DiffusionSpec(kind=DiffusionKind.GBM, alpha=alpha, beta=beta)


def logistic(alpha: float, beta: float, gamma: float) -> DiffusionSpec:
    return DiffusionSpec(kind=DiffusionKind.LOGISTIC, alpha=alpha, beta=beta, gamma=gamma)


def custom(drift: Callable, vol: Callable) -> DiffusionSpec:
    return DiffusionSpec(kind=DiffusionKind.CUSTOM, custom_drift=drift, custom_vol=vol)


# ---------------------------------------------------------------------------
# scale and speed densities


class _BTrack:
    """Antiderivative B(v) = integral_0^v q(e^u) du on the log axis,
    where q(x) = 2 x drift(x) / vol(x)^2, with lazy span extension."""

    def __init__(self, spec: DiffusionSpec):
        self._spec = spec
        self._lo: Optional[object] = None
        self._hi: Optional[object] = None
        self._span_lo = 0.0
        self._span_hi = 0.0

    def _rhs(self, v, y):
        x = math.exp(v)
        d = float(self._spec.drift(np.asarray([x]))[0])
        s2 = float(self._spec.vol(np.asarray([x]))[0]) ** 2
        return [2.0 * x * d / s2]

    def _extend(self, v_lo: float, v_hi: float) -> None:
        if v_hi > self._span_hi:
            target = max(v_hi + 1.0, self._span_hi + 4.0)
            y0 = [0.0] if self._hi is None else list(self._hi.sol(self._span_hi))
            sol = solve_ivp(self._rhs, (self._span_hi, target), y0,
                            method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
            if not sol.success:
                raise ConstructionError(f"scale integral failed above x={math.exp(self._span_hi):g}")
            self._hi = _chain(self._hi, sol)
            self._span_hi = target
        if v_lo < self._span_lo:
            target = min(v_lo - 1.0, self._span_lo - 4.0)
            y0 = [0.0] if self._lo is None else list(self._lo.sol(self._span_lo))
            sol = solve_ivp(self._rhs, (self._span_lo, target), y0,
                            method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
            if not sol.success:
                raise ConstructionError(f"scale integral failed below x={math.exp(self._span_lo):g}")
            self._lo = _chain(self._lo, sol)
            self._span_lo = target

    def value(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.size == 0:
            return np.zeros_like(v)
        self._extend(float(np.min(v)), float(np.max(v)))
        out = np.empty_like(v)
        lo = v < 0.0
        if np.any(lo):
            out[lo] = self._lo.sol(v[lo])[0] if self._lo is not None else 0.0
        if np.any(~lo):
            out[~lo] = self._hi.sol(v[~lo])[0] if self._hi is not None else 0.0
        return out


class _ChainedSol:
    """Concatenation of dense ODE solutions sharing endpoint states."""

    def __init__(self, parts):
        self._parts = parts
        self._edges = [max(p.t[0], p.t[-1]) for p in parts]

    @property
    def sol(self):
        return self

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((self._parts[0].sol(t_arr[:1]).shape[0], t_arr.size))
        for j, tv in enumerate(t_arr):
            i = bisect.bisect_left(self._edges, tv)
            i = min(i, len(self._parts) - 1)
            out[:, j] = self._parts[i].sol(tv)
        return out[:, 0] if scalar else out


def _chain(existing, new_sol):
    if existing is None:
        return new_sol
    parts = existing._parts if isinstance(existing, _ChainedSol) else [existing]
    ordered = sorted(parts + [new_sol], key=lambda p: min(p.t[0], p.t[-1]))
    return _ChainedSol(ordered)


@lru_cache(maxsize=32)
def _b_track(spec: DiffusionSpec) -> _BTrack:
    return _BTrack(spec)


def _b_of_x(spec: DiffusionSpec, x: np.ndarray) -> np.ndarray:
    """B(x) = integral of 2 drift / vol^2; S' = e^-B, speed has e^+B."""
    x = np.asarray(x, dtype=float)
    if spec.kind is DiffusionKind.GBM:
        c = 2.0 * spec.alpha / spec.beta ** 2
        return c * np.log(x)
    if spec.kind is DiffusionKind.LOGISTIC:
        c = 2.0 * spec.alpha / spec.beta ** 2
        k = c * spec.gamma
        return c * np.log(x) - k * x
    return _b_track(spec).value(np.log(x))


def scale_density(spec: DiffusionSpec, x) -> np.ndarray:
    """Scale density S'(x) = exp(-B(x))."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("state values must be positive")
    return np.exp(-_b_of_x(spec, x))


def speed_density(spec: DiffusionSpec, x) -> np.ndarray:
    """Speed density m'(x) = 2 exp(B(x)) / vol(x)^2."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("state values must be positive")
    return 2.0 * np.exp(_b_of_x(spec, x)) / spec.vol(x) ** 2


# ---------------------------------------------------------------------------
# excessive basis


@dataclass(frozen=True)
class ExcessiveBasis:
    """Monotone solutions of A u = rho u with associated data.

    psi is increasing with psi(0+) = 0; phi is decreasing. For models
    with an entrance-like upper boundary phi may approach a positive
    limit rather than 0. The wronskian is
    (psi' phi - phi' psi) / S', constant in x.

    x_lo and x_hi bound the interval on which numerically built bases
    are certified; closed-form bases use (0, inf).
    """

    rho: float
    psi: Callable[[np.ndarray], np.ndarray]
    phi: Callable[[np.ndarray], np.ndarray]
    psi_prime: Callable[[np.ndarray], np.ndarray]
    phi_prime: Callable[[np.ndarray], np.ndarray]
    wronskian: float
    scale: Callable[[np.ndarray], np.ndarray]
    x_lo: float = 0.0
    x_hi: float = math.inf


def _gbm_roots(alpha: float, beta: float, rho: float) -> tuple[float, float]:
    """Roots of (beta^2/2) t (t-1) + alpha t = rho; b > 0 > a when rho > 0."""
    half = 0.5 - alpha / beta ** 2
    disc = math.sqrt(half * half + 2.0 * rho / beta ** 2)
    return half + disc, half - disc


def _gbm_basis(spec: DiffusionSpec, rho: float) -> ExcessiveBasis:
    b, a = _gbm_roots(spec.alpha, spec.beta, rho)

    def psi(x):
        return np.power(np.asarray(x, dtype=float), b)

    def phi(x):
        return np.power(np.asarray(x, dtype=float), a)

    def psi_prime(x):
        return b * np.power(np.asarray(x, dtype=float), b - 1.0)

    def phi_prime(x):
        return a * np.power(np.asarray(x, dtype=float), a - 1.0)

    return ExcessiveBasis(
        rho=rho, psi=psi, phi=phi, psi_prime=psi_prime, phi_prime=phi_prime,
        wronskian=b - a, scale=lambda x: scale_density(spec, x))


def _logistic_basis(spec: DiffusionSpec, rho: float) -> ExcessiveBasis:
    # near 0 the drift is ~ alpha*x, so the exponent b matches the GBM root
    b, _ = _gbm_roots(spec.alpha, spec.beta, rho)
    c = 2.0 * spec.alpha / spec.beta ** 2
    k = c * spec.gamma
    bt = 2.0 * b + c

    def psi(x):
        x = np.asarray(x, dtype=float)
        return np.power(x, b) * _m_vec(b, bt, k * x)

    def phi(x):
        x = np.asarray(x, dtype=float)
        return np.power(x, b) * _u_vec(b, bt, k * x)

    def psi_prime(x):
        x = np.asarray(x, dtype=float)
        m0 = _m_vec(b, bt, k * x)
        m1 = _m_vec(b + 1.0, bt + 1.0, k * x)
        return np.power(x, b - 1.0) * (b * m0 + (k * x) * (b / bt) * m1)

    def phi_prime(x):
        x = np.asarray(x, dtype=float)
        u0 = _u_vec(b, bt, k * x)
        u1 = _u_vec(b + 1.0, bt + 1.0, k * x)
        return np.power(x, b - 1.0) * (b * u0 - (k * x) * b * u1)

    x_ref = np.asarray([1.0])
    w = float(((psi_prime(x_ref) * phi(x_ref) - phi_prime(x_ref) * psi(x_ref))
               / scale_density(spec, x_ref))[0])
    return ExcessiveBasis(
        rho=rho, psi=psi, phi=phi, psi_prime=psi_prime, phi_prime=phi_prime,
        wronskian=w, scale=lambda x: scale_density(spec, x))


class _RiccatiCore:
    """Numerically shot psi/phi pair for a CUSTOM model.

    Solves s' = s - s^2 + (2 x^2 / vol^2)(rho - drift * s / x) on
    v = ln x for s = (ln u)', upward from the lower end (increasing
    branch) and downward from the upper end (decreasing branch), then
    recovers u = exp(integral s dv) normalized to u(1) = 1.
    """

    def __init__(self, spec: DiffusionSpec, rho: float):
        self._spec = spec
        self._rho = rho
        v_lo, v_hi = -_SPAN_INIT, _SPAN_INIT
        while True:
            self._shoot(v_lo, v_hi)
            need_lo = self._w_psi(v_lo) - self._w_psi(0.0) > math.log(_DECAY_TOL) \
                and v_lo > -_SPAN_CAP
            need_hi = self._w_phi(v_hi) - self._w_phi(0.0) > math.log(_DECAY_TOL) \
                and v_hi < _SPAN_CAP
            if not (need_lo or need_hi):
                break
            if need_lo:
                v_lo = max(v_lo - _SPAN_STEP, -_SPAN_CAP)
            if need_hi:
                v_hi = min(v_hi + _SPAN_STEP, _SPAN_CAP)
        self.v_lo, self.v_hi = v_lo, v_hi
        self._check_monotone()

    def _rhs(self, v, y):
        x = math.exp(v)
        d = float(self._spec.drift(np.asarray([x]))[0])
        s2 = float(self._spec.vol(np.asarray([x]))[0]) ** 2
        s = y[1]
        ds = s - s * s + (2.0 * x * x / s2) * (self._rho - d * s / x)
        return [s, ds]

    def _asym_roots(self, v: float) -> tuple[float, float]:
        x = math.exp(v)
        d = float(self._spec.drift(np.asarray([x]))[0])
        s2 = float(self._spec.vol(np.asarray([x]))[0]) ** 2
        q = 2.0 * x * d / s2
        disc = math.sqrt((1.0 - q) ** 2 + 8.0 * x * x * self._rho / s2)
        return 0.5 * ((1.0 - q) + disc), 0.5 * ((1.0 - q) - disc)

    def _shoot(self, v_lo: float, v_hi: float) -> None:
        start = v_lo - _SHOT_BUFFER
        s_plus, _ = self._asym_roots(start)
        up = solve_ivp(self._rhs, (start, v_hi), [0.0, s_plus],
                       method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        start = v_hi + _SHOT_BUFFER
        _, s_minus = self._asym_roots(start)
        down = solve_ivp(self._rhs, (start, v_lo), [0.0, s_minus],
                         method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
        if not (up.success and down.success):
            raise ConstructionError(
                f"eigenfunction shooting failed for rho={self._rho} "
                f"on x in [{math.exp(v_lo):.3g}, {math.exp(v_hi):.3g}]")
        self._up, self._down = up, down

    def _w_psi(self, v: float) -> float:
        return float(self._up.sol(v)[0])

    def _w_phi(self, v: float) -> float:
        return float(self._down.sol(v)[0])

    def _check_monotone(self) -> None:
        grid = np.linspace(self.v_lo, self.v_hi, 201)
        s_up = self._up.sol(grid)[1]
        s_dn = self._down.sol(grid)[1]
        if np.any(s_up < -1e-9):
            raise ConstructionError("increasing eigenfunction lost monotonicity")
        if np.any(s_dn > 1e-9):
            raise ConstructionError("decreasing eigenfunction lost monotonicity")

    def _ensure(self, v_min: float, v_max: float) -> None:
        if v_min >= self.v_lo and v_max <= self.v_hi:
            return
        if v_min < -_SPAN_HARD_CAP or v_max > _SPAN_HARD_CAP:
            raise ConstructionError(
                f"state outside supported range [{math.exp(-_SPAN_HARD_CAP):.3g}, "
                f"{math.exp(_SPAN_HARD_CAP):.3g}]")
        self.v_lo = min(self.v_lo, math.floor(v_min - 1.0))
        self.v_hi = max(self.v_hi, math.ceil(v_max + 1.0))
        self._shoot(self.v_lo, self.v_hi)
        self._check_monotone()

    def eval(self, x: np.ndarray, which: str, deriv: bool) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            raise ValueError("state values must be positive")
        v = np.log(x)
        self._ensure(float(np.min(v)), float(np.max(v)))
        sol = self._up if which == "psi" else self._down
        ws = sol.sol(np.atleast_1d(v))
        u = np.exp(ws[0] - float(sol.sol(0.0)[0]))
        out = u * ws[1] / np.atleast_1d(x) if deriv else u
        return out.reshape(np.shape(x)) if np.shape(x) else out[0]


def _custom_basis(spec: DiffusionSpec, rho: float) -> ExcessiveBasis:
    core = _RiccatiCore(spec, rho)
    w = float(core._up.sol(0.0)[1] - core._down.sol(0.0)[1])
    return ExcessiveBasis(
        rho=rho,
        psi=lambda x: core.eval(x, "psi", False),
        phi=lambda x: core.eval(x, "phi", False),
        psi_prime=lambda x: core.eval(x, "psi", True),
        phi_prime=lambda x: core.eval(x, "phi", True),
        wronskian=w,
        scale=lambda x: scale_density(spec, x),
        x_lo=math.exp(core.v_lo),
        x_hi=math.exp(core.v_hi))


@lru_cache(maxsize=128)
def excessive_basis(spec: DiffusionSpec, rho: float) -> ExcessiveBasis:
    """Increasing/decreasing solutions of A u = rho u for this model.

    Results are cached per (spec, rho). Raises ConstructionError if a
    numeric basis cannot be built or loses monotonicity.
    """
    if rho <= 0.0:
        raise ValueError(f"discount rate rho must be positive, got {rho}")
    if spec.kind is DiffusionKind.GBM:
        return _gbm_basis(spec, rho)
    if spec.kind is DiffusionKind.LOGISTIC:
        if spec.gamma == 0.0:
            return _gbm_basis(spec, rho)
        return _logistic_basis(spec, rho)
    return _custom_basis(spec, rho)


def wronskian_check(basis: ExcessiveBasis, grid) -> float:
    """Max relative deviation of (psi' phi - phi' psi)/S' from its
    stored constant over the given state grid."""
    x = np.asarray(grid, dtype=float)
    w = (basis.psi_prime(x) * basis.phi(x) - basis.phi_prime(x) * basis.psi(x)) \
        / basis.scale(x)
    return float(np.max(np.abs(w - basis.wronskian)) / abs(basis.wronskian))
