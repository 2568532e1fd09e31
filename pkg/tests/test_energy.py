"""Tests for the distortion densities and their analytic derivatives."""
import math

import numpy as np
import pytest

from stiffmap.core.energy import (DensityKind, EnergyParams, chi, chi_derivative, density_gradient,
                                  evaluate, mixed_density, mixed_terms, regularized_density, shape_density,
                                  stiffened_density, symmetric_dirichlet_density, symmetric_dirichlet_terms,
                                  volume_density)
from tests.meshes import random_rotation


# ── Helpers ──────────────────────────────────────────────────────────


def _random_positive_jacobians(d: int, count: int, seed: int = 7):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        J = rng.normal(size=(d, d)) + 1.5 * np.eye(d)
        if np.linalg.det(J) > 0.1:
            out.append(J)
    return out


def _finite_difference(J: np.ndarray, params: EnergyParams) -> np.ndarray:
    h = 1e-5 * np.linalg.norm(J)
    grad = np.zeros_like(J)
    for idx in np.ndindex(*J.shape):
        step = np.zeros_like(J)
        step[idx] = h
        plus = evaluate((J + step)[None], params).value[0]
        minus = evaluate((J - step)[None], params).value[0]
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


# ━━ shape_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestShapeDensity:
    def test_identity(self):
        assert shape_density(np.eye(2)).value == pytest.approx(1.0)
        assert shape_density(np.eye(3)).value == pytest.approx(1.0)

    def test_anisotropic(self):
        assert shape_density(np.diag([2.0, 0.5])).value == pytest.approx(2.125)

    def test_similarity_is_minimal(self):
        R = np.array([[math.cos(0.3), -math.sin(0.3)], [math.sin(0.3), math.cos(0.3)]])
        assert shape_density(3.0 * R).value == pytest.approx(1.0)

    def test_inverted_is_infinite(self):
        result = shape_density(np.diag([1.0, -1.0]))
        assert result.finite is False
        assert result.value == math.inf
        assert result.grad is None


# ━━ volume_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestVolumeDensity:
    def test_unit_determinant(self):
        assert volume_density(np.diag([3.0, 1.0 / 3.0])).value == pytest.approx(1.0)

    def test_determinant_four(self):
        assert volume_density(np.diag([2.0, 2.0])).value == pytest.approx(2.125)

    def test_inverted(self):
        assert volume_density(np.diag([1.0, -1.0])).value == math.inf


# ━━ mixed_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestMixedDensity:
    @pytest.mark.parametrize("theta", [0.0, 0.25, 0.5, 1.0])
    def test_identity_any_theta(self, theta):
        assert mixed_density(np.eye(2), theta).value == pytest.approx(1.0)

    def test_half_theta(self):
        assert mixed_density(np.diag([2.0, 0.5]), 0.5).value == pytest.approx(1.5625)

    def test_theta_zero_is_shape(self):
        J = np.array([[1.2, 0.3], [-0.1, 0.8]])
        assert mixed_density(J, 0.0).value == pytest.approx(shape_density(J).value)

    def test_theta_out_of_range(self):
        with pytest.raises(ValueError):
            mixed_density(np.eye(2), 1.5)


# ━━ chi ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestChi:
    def test_zero_determinant(self):
        assert chi(0.0, 0.3) == pytest.approx(0.15)

    def test_no_regularization(self):
        assert chi(1.0, 0.0) == pytest.approx(1.0)

    def test_negative(self):
        assert chi(-3.0, 4.0) == pytest.approx(1.0)

    def test_stable_for_large_negative(self):
        # the naive (D + sqrt(eps^2 + D^2)) / 2 cancels to 0 here
        assert chi(-1e8, 1e-3) == pytest.approx(0.25e-14, rel=1e-6)

    def test_always_positive_for_positive_epsilon(self):
        D = np.linspace(-10, 10, 101)
        assert np.all(chi(D, 1e-2) > 0)

    def test_derivative_matches_finite_difference(self):
        for D in (-2.0, -0.1, 0.0, 0.7, 3.0):
            h = 1e-6
            fd = (chi(D + h, 0.5) - chi(D - h, 0.5)) / (2 * h)
            assert chi_derivative(D, 0.5) == pytest.approx(fd, rel=1e-6)


# ━━ regularized_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestRegularizedDensity:
    def test_identity_small_epsilon(self):
        assert regularized_density(np.eye(2), 0.5, 1e-8).value == pytest.approx(1.0)

    def test_inverted_is_finite(self):
        result = regularized_density(np.diag([1.0, -1.0]), 0.5, 2.0)
        assert result.finite is True
        assert result.value == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0, rel=1e-5)

    def test_bounded_by_unregularized(self):
        for J in _random_positive_jacobians(2, 20):
            plain = mixed_density(J, 0.5).value
            assert regularized_density(J, 0.5, 0.1).value <= plain * (1 + 1e-12)

    def test_epsilon_required(self):
        with pytest.raises(ValueError, match="epsilon"):
            regularized_density(np.eye(2), 0.5, 0.0)

    def test_converges_monotonically_as_epsilon_halves(self):
        epsilons = []
        epsilon = 1e-2
        while epsilon >= 1e-10:
            epsilons.append(epsilon)
            epsilon /= 2.0
        for d in (2, 3):
            for J in _random_positive_jacobians(d, 10, seed=d):
                plain = mixed_density(J, 0.5).value
                gaps = [abs(regularized_density(J, 0.5, e).value - plain) for e in epsilons]
                roundoff = 4.0 * np.finfo(float).eps * plain
                assert all(b <= a + roundoff for a, b in zip(gaps, gaps[1:]))
                assert gaps[-1] <= 1e-12 * plain


# ━━ stiffened_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestStiffenedDensity:
    def test_identity_half(self):
        assert stiffened_density(np.eye(2), 0.5, 0.5).value == pytest.approx(2.0)

    def test_zero_t_is_plain(self):
        J = np.diag([2.0, 0.5])
        assert stiffened_density(J, 0.5, 0.0).value == pytest.approx(mixed_density(J, 0.5).value)

    def test_barrier(self):
        # theta = 1 keeps only the volume term, 2.125 at det 4
        J = np.diag([2.0, 2.0])
        f = mixed_density(J, 1.0).value
        assert stiffened_density(J, 1.0, 1.0 / f).finite is False
        assert stiffened_density(J, 1.0, 0.99 / f).finite is True

    def test_sd(self):
        J = np.diag([2.0, 1.0])
        result = stiffened_density(J, 0.5, 0.5, DensityKind.SYMMETRIC_DIRICHLET)
        assert result.value == pytest.approx(1.5625 / (1.0 - 0.5 * 1.5625))

    def test_increasing_in_t(self):
        for J in _random_positive_jacobians(2, 10, seed=5):
            f = mixed_density(J, 0.5).value
            values = [stiffened_density(J, 0.5, s / f).value for s in (0.0, 0.2, 0.5, 0.9, 0.99)]
            assert all(a < b for a, b in zip(values, values[1:]))

    def test_regularized_and_stiffened_rejected(self):
        with pytest.raises(ValueError, match="not both"):
            EnergyParams(epsilon=0.1, t=0.2)


# ━━ symmetric_dirichlet_density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestSymmetricDirichlet:
    def test_identity(self):
        assert symmetric_dirichlet_density(np.eye(2)).value == pytest.approx(1.0)
        assert symmetric_dirichlet_density(np.eye(3)).value == pytest.approx(1.0)

    def test_diagonal(self):
        assert symmetric_dirichlet_density(np.diag([2.0, 1.0])).value == pytest.approx(1.5625)

    def test_matches_inverse_form(self):
        for J in _random_positive_jacobians(3, 5):
            expected = (np.sum(J * J) + np.sum(np.linalg.inv(J) ** 2)) / 6.0
            assert symmetric_dirichlet_density(J).value == pytest.approx(expected)

    def test_inverted(self):
        assert symmetric_dirichlet_density(np.diag([-1.0, 1.0])).finite is False


# ━━ density_gradient ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


class TestDensityGradient:
    def test_shape_stationary_at_identity(self):
        grad = density_gradient(np.eye(2), EnergyParams(theta=0.0))
        np.testing.assert_allclose(grad, np.zeros((2, 2)), atol=1e-14)

    def test_volume_stationary_at_unit_determinant(self):
        grad = density_gradient(np.diag([2.0, 0.5]), EnergyParams(theta=1.0))
        np.testing.assert_allclose(grad, np.zeros((2, 2)), atol=1e-14)

    @pytest.mark.parametrize("d", [2, 3])
    @pytest.mark.parametrize("params", [
        EnergyParams(theta=0.5),
        EnergyParams(theta=0.3, epsilon=0.2),
        EnergyParams(theta=0.5, t=0.1),
        EnergyParams(density=DensityKind.SYMMETRIC_DIRICHLET),
        EnergyParams(density=DensityKind.SYMMETRIC_DIRICHLET, epsilon=0.3),
        EnergyParams(density=DensityKind.SYMMETRIC_DIRICHLET, t=0.05),
    ])
    def test_matches_finite_differences(self, d, params):
        for J in _random_positive_jacobians(d, 5):
            if params.t > 0 and not evaluate(J[None], params).finite[0]:
                continue
            analytic = density_gradient(J, params)
            numeric = _finite_difference(J, params)
            assert np.linalg.norm(analytic - numeric) <= 1e-6 * max(1.0, np.linalg.norm(numeric))

    def test_regularized_gradient_on_inverted(self):
        J = np.array([[0.5, 0.2], [0.1, -0.7]])
        params = EnergyParams(theta=0.5, epsilon=0.5)
        numeric = _finite_difference(J, params)
        assert np.linalg.norm(density_gradient(J, params) - numeric) <= 1e-6 * np.linalg.norm(numeric)

    def test_undefined_outside_domain(self):
        with pytest.raises(ValueError, match="not finite"):
            density_gradient(np.diag([1.0, -1.0]), EnergyParams())

    def test_bad_shape(self):
        with pytest.raises(ValueError, match="matrix"):
            density_gradient(np.ones((2, 3)), EnergyParams())


# ━━ invariants shared by every density ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━


DENSITIES = {
    "shape": shape_density,
    "volume": volume_density,
    "mixed": lambda J: mixed_density(J, 0.3),
    "sd": symmetric_dirichlet_density,
}


class TestDensityInvariants:
    @pytest.mark.parametrize("name", sorted(DENSITIES))
    @pytest.mark.parametrize("d", [2, 3])
    def test_rotation_invariance(self, name, d):
        density = DENSITIES[name]
        rng = np.random.default_rng(17)
        for J in _random_positive_jacobians(d, 20, seed=d + 10):
            f = density(J).value
            for _ in range(3):
                R = random_rotation(d, rng)
                assert abs(density(R @ J).value - f) < 1e-12 * f
                assert abs(density(J @ R).value - f) < 1e-12 * f

    @pytest.mark.parametrize("d", [2, 3])
    def test_lower_bound_over_random_jacobians(self, d):
        rng = np.random.default_rng(d)
        J = rng.normal(size=(30000, d, d))
        J = J[np.linalg.det(J) > 0][:10000]
        assert len(J) == 10000
        for theta in (0.0, 0.5, 1.0):
            mixed = mixed_terms(J, theta)
            assert np.all(mixed.finite)
            assert np.min(mixed.value) >= 1.0 - 1e-12
        sd = symmetric_dirichlet_terms(J)
        assert np.all(sd.finite)
        assert np.min(sd.value) >= 1.0 - 1e-12
