import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from temam import DomainError
from temam.kernels import (
    SERIES_THRESHOLD,
    apply_heat,
    apply_heat_rate,
    apply_m_epsilon,
    heat_kernel_field,
    helmholtz,
    leray_project,
    m_epsilon_symbol,
    materialize_kernel,
    relative_phi1,
)
from temam.spectral import divergence, lq_norm, lq_norm_physical, make_grid, mean_integral, to_spectral

xi3 = st.lists(st.floats(-4, 4, allow_nan=False), min_size=3, max_size=3)
times = st.floats(0, 3, allow_nan=False)
epsilons = st.floats(0.05, 5, allow_nan=False)


def random_field(grid, seed=0):
    return to_spectral(np.random.default_rng(seed).standard_normal((grid.n_dims,) + grid.shape), grid)


class TestSymbol:
    def test_identity_at_origin(self):
        for t in (0.0, 0.3, 10.0):
            np.testing.assert_array_equal(m_epsilon_symbol(np.zeros(3), t, 0.1), np.eye(3))

    def test_identity_at_time_zero(self):
        np.testing.assert_allclose(m_epsilon_symbol([1.0, -2.0, 0.5], 0.0, 1.0), np.eye(3), atol=1e-15)

    def test_eigenvalues(self):
        xi = np.array([0.0, 2.0, 0.0])
        m = m_epsilon_symbol(xi, 0.5, 0.25)
        np.testing.assert_allclose(m @ xi, np.exp(-0.5 * 5 * 4) * xi, rtol=1e-13)
        perp = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(m @ perp, np.exp(-0.5 * 4) * perp, rtol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(xi3, times, times, epsilons)
    def test_semigroup_law(self, xi, t, s, eps):
        lhs = m_epsilon_symbol(xi, t + s, eps)
        rhs = m_epsilon_symbol(xi, t, eps) @ m_epsilon_symbol(xi, s, eps)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13

    @settings(max_examples=40, deadline=None)
    @given(xi3, times, epsilons)
    def test_symmetric_contraction(self, xi, t, eps):
        m = m_epsilon_symbol(xi, t, eps)
        np.testing.assert_allclose(m, m.T, atol=1e-15)
        assert np.max(np.abs(np.linalg.eigvalsh(m))) <= 1.0 + 1e-14

    def test_rejects_negative_time(self):
        with pytest.raises(DomainError):
            m_epsilon_symbol([1.0, 0.0], -1.0, 1.0)


class TestRelativePhi:
    def test_series_branch_is_continuous(self):
        r = np.array([SERIES_THRESHOLD * 0.999, SERIES_THRESHOLD * 1.001])
        exact = -np.expm1(-r) / r
        np.testing.assert_allclose(relative_phi1(r), exact, rtol=1e-15)

    def test_limit_at_zero(self):
        assert relative_phi1(np.array([0.0]))[0] == 1.0

    def test_large_argument(self):
        np.testing.assert_allclose(relative_phi1(np.array([50.0])), [1 / 50.0], rtol=1e-14)


class TestGridIdentities:
    grid = make_grid(3, 2 * np.pi, 16)

    @pytest.mark.parametrize("eps", [0.1, 1.0])
    def test_solenoidal_fields_diffuse(self, eps):
        u = leray_project(random_field(self.grid, 1))
        a = apply_m_epsilon(u, 0.7, eps).coeffs
        b = apply_heat(u, 0.7).coeffs
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    @pytest.mark.parametrize("eps", [0.1, 1.0])
    def test_divergence_diffuses_faster(self, eps):
        f = random_field(self.grid, 2)
        lhs = divergence(apply_m_epsilon(f, 0.4, eps)).coeffs
        rhs = apply_heat_rate(divergence(f), 0.4, 1 + 1 / eps).coeffs
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))

    def test_helmholtz_split(self):
        u = random_field(self.grid, 3)
        split = helmholtz(u)
        np.testing.assert_allclose(split.reconstruct().coeffs, u.coeffs, atol=1e-15)
        assert np.max(np.abs(divergence(split.solenoidal).coeffs)) < 1e-13
        overlap = np.sum(split.solenoidal.coeffs * np.conj(split.gradient_part.coeffs), axis=0)
        assert np.max(np.abs(overlap)) < 1e-13

    def test_projection_idempotent(self):
        p = leray_project(random_field(self.grid, 4))
        np.testing.assert_allclose(leray_project(p).coeffs, p.coeffs, atol=1e-15)

    def test_mean_preserved(self):
        u = random_field(self.grid, 5)
        np.testing.assert_allclose(mean_integral(apply_m_epsilon(u, 1.3, 0.2)), mean_integral(u), atol=1e-12)


class TestMaterializedKernel:
    def test_rejects_time_zero(self):
        with pytest.raises(DomainError, match="t > 0"):
            materialize_kernel(make_grid(2, 10.0, 16), 0.0, 1.0)

    def test_unit_mass_diagonal(self):
        g = make_grid(2, 40.0, 128)
        K = materialize_kernel(g, 1.0, 0.5)
        mass = K.sum(axis=(-2, -1)) * g.cell_volume
        np.testing.assert_allclose(mass, np.eye(2), atol=1e-12)

    def test_heat_kernel_profile_constant(self):
        g = make_grid(2, 60.0, 256)
        # ||E(t)||_2 = (8 pi t)^{-1/2} on the whole plane
        assert lq_norm(heat_kernel_field(g, 2.0), 2) == pytest.approx((16 * np.pi) ** -0.5, rel=1e-10)
        assert lq_norm(heat_kernel_field(g, 2.0), np.inf) == pytest.approx(1 / (8 * np.pi), rel=1e-10)

    @pytest.mark.parametrize("q", [1.0, 2.0, np.inf])
    def test_scaling_small_grid(self, q):
        g = make_grid(2, 80.0, 256)
        a = (1 - 1 / q)
        vals = [t**a * lq_norm_physical(materialize_kernel(g, t, 1.0), g, q) for t in (0.5, 1.0, 2.0)]
        assert (max(vals) - min(vals)) / np.mean(vals) < 1e-4
