"""Tests for model specs, scale/speed densities and eigenfunction bases.

Frozen reference values were computed with mpmath at 40 significant
digits from the defining equations, independently of this package.
"""
import math

import numpy as np
import pytest

from entrysolve import (
    ConstructionError,
    custom_diffusion,
    excessive_basis,
    gbm,
    logistic,
    scale_density,
    speed_density,
    wronskian_check,
)

ALPHA, BETA = 0.05, 0.25
C_EXP = 2.0 * ALPHA / BETA ** 2  # exponent in the scale density, 1.6

# frozen roots of (beta^2/2) t (t - 1) + alpha t = rho for alpha=0.05, beta=0.25
ROOTS = {
    1.1: (5.640538696111658, -6.240538696111658),
    0.6: (4.092038251199550, -4.692038251199550),
    0.1: (1.513835714721705, -2.113835714721705),
}

# frozen: k^(1-Bt) Gamma(Bt) / Gamma(b) with k=0.32, b=5.640538696...,
# Bt = 2b + 1.6, the Wronskian of the gamma=0.2 logistic basis at rho=1.1
LOGISTIC_W_11 = 4087298044132.362955911


def harmonicity_residual(spec, basis, x: np.ndarray) -> float:
    """Max relative residual of (sigma^2/2) u'' + mu u' - rho u over x,
    with u'' taken by central differences of the supplied derivative."""
    worst = 0.0
    for u, up in ((basis.psi, basis.psi_prime), (basis.phi, basis.phi_prime)):
        h = 1e-5 * x
        upp = (up(x + h) - up(x - h)) / (2.0 * h)
        res = 0.5 * spec.vol(x) ** 2 * upp + spec.drift(x) * up(x) - basis.rho * u(x)
        worst = max(worst, float(np.max(np.abs(res) / (basis.rho * np.abs(u(x))))))
    return worst


class TestSpecs:
    def test_gbm_coefficients(self):
        spec = gbm(ALPHA, BETA)
        x = np.array([0.5, 2.0])
        np.testing.assert_allclose(spec.drift(x), ALPHA * x, rtol=0.0)
        np.testing.assert_allclose(spec.vol(x), BETA * x, rtol=0.0)

    def test_logistic_coefficients(self):
        spec = logistic(ALPHA, BETA, 0.2)
        x = np.array([0.5, 5.0, 10.0])
        np.testing.assert_allclose(spec.drift(x), ALPHA * x * (1.0 - 0.2 * x), rtol=1e-15)
        np.testing.assert_allclose(spec.vol(x), BETA * x, rtol=0.0)
        # drift turns negative above the carrying capacity 1/gamma
        assert spec.drift(6.0) < 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            gbm(0.05, 0.0)
        with pytest.raises(ValueError):
            logistic(0.05, 0.25, -0.1)
        with pytest.raises(ValueError):
            custom_diffusion(None, None)
        with pytest.raises(ValueError, match="positive"):
            custom_diffusion(lambda x: 0.05 * x, lambda x: 0.0 * x)

    def test_densities_gbm(self):
        spec = gbm(ALPHA, BETA)
        assert float(speed_density(spec, 1.0)) == pytest.approx(32.0, rel=1e-14)
        x = np.array([0.5, 1.0, 4.0])
        np.testing.assert_allclose(scale_density(spec, x), x ** (-C_EXP), rtol=1e-12)
        np.testing.assert_allclose(
            speed_density(spec, x), 2.0 / (BETA ** 2 * x ** 2) * x ** C_EXP, rtol=1e-12)

    def test_densities_positive_domain(self):
        spec = gbm(ALPHA, BETA)
        with pytest.raises(ValueError):
            scale_density(spec, 0.0)
        with pytest.raises(ValueError):
            speed_density(spec, np.array([1.0, -2.0]))


class TestGbmBasis:
    def test_frozen_roots(self):
        spec = gbm(ALPHA, BETA)
        for rho, (b, a) in ROOTS.items():
            basis = excessive_basis(spec, rho)
            # psi = x^b, phi = x^a with psi(1) = phi(1) = 1
            assert float(basis.psi(1.0)) == 1.0
            assert float(basis.phi(1.0)) == 1.0
            assert float(basis.psi(2.0)) == pytest.approx(2.0 ** b, rel=1e-13)
            assert float(basis.phi(2.0)) == pytest.approx(2.0 ** a, rel=1e-13)
            assert basis.wronskian == pytest.approx(b - a, rel=1e-13)

    def test_derivatives_and_wronskian_constancy(self):
        spec = gbm(ALPHA, BETA)
        basis = excessive_basis(spec, 1.1)
        b, a = ROOTS[1.1]
        x = np.geomspace(0.2, 9.0, 41)
        np.testing.assert_allclose(basis.psi_prime(x), b * x ** (b - 1), rtol=1e-12)
        np.testing.assert_allclose(basis.phi_prime(x), a * x ** (a - 1), rtol=1e-12)
        assert wronskian_check(basis, x) < 1e-11

    def test_harmonicity(self):
        spec = gbm(ALPHA, BETA)
        basis = excessive_basis(spec, 1.1)
        assert harmonicity_residual(spec, basis, np.geomspace(0.5, 8.0, 21)) < 1e-6

    def test_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            excessive_basis(gbm(ALPHA, BETA), 0.0)


class TestLogisticBasis:
    def test_frozen_wronskian(self):
        basis = excessive_basis(logistic(ALPHA, BETA, 0.2), 1.1)
        assert basis.wronskian == pytest.approx(LOGISTIC_W_11, rel=1e-10)

    def test_monotone_and_normalized(self):
        basis = excessive_basis(logistic(ALPHA, BETA, 0.2), 1.1)
        x = np.geomspace(0.2, 12.0, 60)
        psi, phi = basis.psi(x), basis.phi(x)
        assert np.all(np.diff(psi) > 0.0)
        assert np.all(np.diff(phi) < 0.0)
        assert np.all(phi > 0.0)
        # increasing branch vanishes at the lower boundary
        assert float(basis.psi(1e-6)) < 1e-20

    def test_wronskian_constancy(self):
        basis = excessive_basis(logistic(ALPHA, BETA, 0.2), 1.1)
        assert wronskian_check(basis, np.geomspace(0.3, 10.0, 40)) < 1e-10

    def test_harmonicity(self):
        spec = logistic(ALPHA, BETA, 0.2)
        basis = excessive_basis(spec, 1.1)
        assert harmonicity_residual(spec, basis, np.geomspace(0.5, 6.0, 21)) < 1e-6

    def test_zero_crowding_reduces_to_gbm(self):
        b_log = excessive_basis(logistic(ALPHA, BETA, 0.0), 0.6)
        b_gbm = excessive_basis(gbm(ALPHA, BETA), 0.6)
        x = np.array([0.4, 1.0, 3.0, 7.0])
        np.testing.assert_allclose(b_log.psi(x), b_gbm.psi(x), rtol=1e-14)
        np.testing.assert_allclose(b_log.phi(x), b_gbm.phi(x), rtol=1e-14)
        assert b_log.wronskian == pytest.approx(b_gbm.wronskian, rel=1e-14)


@pytest.fixture(scope="module")
def pair():
    spec_c = custom_diffusion(lambda x: ALPHA * x, lambda x: BETA * x)
    return excessive_basis(spec_c, 1.1), excessive_basis(gbm(ALPHA, BETA), 1.1)


class TestCustomBasis:
    """The shooting route, cross-checked against GBM closed forms."""

    def test_values_match_closed_form(self, pair):
        got, want = pair
        x = np.geomspace(0.3, 8.0, 30)
        np.testing.assert_allclose(got.psi(x), want.psi(x), rtol=5e-6)
        np.testing.assert_allclose(got.phi(x), want.phi(x), rtol=5e-6)

    def test_derivatives_match_closed_form(self, pair):
        got, want = pair
        x = np.geomspace(0.3, 8.0, 30)
        np.testing.assert_allclose(got.psi_prime(x), want.psi_prime(x), rtol=5e-6)
        np.testing.assert_allclose(got.phi_prime(x), want.phi_prime(x), rtol=5e-6)

    def test_wronskian(self, pair):
        got, want = pair
        assert got.wronskian == pytest.approx(want.wronskian, rel=1e-7)
        assert wronskian_check(got, np.geomspace(0.5, 5.0, 20)) < 1e-8

    def test_certified_interval_recorded(self, pair):
        got, _ = pair
        assert 0.0 < got.x_lo < 1.0 < got.x_hi < math.inf

    def test_harmonicity(self):
        # mean-reverting drift not covered by either closed form
        spec = custom_diffusion(
            lambda x: 0.08 * x * (1.0 - x / 4.0) / (1.0 + 0.1 * x),
            lambda x: 0.25 * x)
        basis = excessive_basis(spec, 0.9)
        assert harmonicity_residual(spec, basis, np.geomspace(0.5, 5.0, 15)) < 1e-5

    def test_state_outside_supported_range(self, pair):
        got, _ = pair
        with pytest.raises(ConstructionError, match="supported range"):
            got.psi(1e-16)
        with pytest.raises(ConstructionError, match="supported range"):
            got.phi(1e16)

    def test_rejects_nonpositive_state(self, pair):
        got, _ = pair
        with pytest.raises(ValueError):
            got.psi(np.array([1.0, 0.0]))
