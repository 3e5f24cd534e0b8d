import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpl_limit.phase_grid import (
    DistributionField,
    DomainError,
    OverflowGuardError,
    SpatialGrid,
    VelocityGrid,
    default_extent,
    gaussian,
    integrate,
    maxwellian,
    moments,
    polynomial,
    weighted_l2,
    x_derivative_norm,
)


class TestVelocityGrid:
    @pytest.mark.parametrize("n", [7, 6, 0, 9])
    def test_rejects_odd_or_small(self, n):
        with pytest.raises(DomainError):
            VelocityGrid(n)

    def test_rejects_bad_extent(self):
        with pytest.raises(DomainError):
            VelocityGrid(8, 0.0)

    @pytest.mark.parametrize("n", [8, 12, 16])
    def test_nodes_symmetric_and_avoid_origin(self, n):
        g = VelocityGrid(n, 5.0)
        x = g.nodes
        assert x.shape == (n,)
        np.testing.assert_allclose(x, -x[::-1], atol=1e-14)
        assert np.min(np.abs(x)) == pytest.approx(g.h / 2)
        assert g.h * n == pytest.approx(10.0)
        assert g.cell_volume == pytest.approx(g.h ** 3)

    def test_to_dict(self):
        assert VelocityGrid(8, 4.0).to_dict()["extent"] == 4.0


class TestSpatialGrid:
    def test_rejects_too_few(self):
        with pytest.raises(DomainError):
            SpatialGrid(3)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_spectral_derivative_exact(self, k):
        xg = SpatialGrid(16)
        x = xg.nodes
        f = np.sin(2 * np.pi * k * x)
        np.testing.assert_allclose(xg.derivative(f), 2 * np.pi * k * np.cos(2 * np.pi * k * x),
                                   atol=1e-10)
        np.testing.assert_allclose(xg.derivative(f, order=2), -(2 * np.pi * k) ** 2 * f, atol=1e-8)

    def test_integral_of_constant(self):
        xg = SpatialGrid(10, 2.0)
        assert xg.integrate(np.full(10, 3.0)) == pytest.approx(6.0)


class TestMaxwellian:
    @given(q=st.floats(0.5, 3.0), u=st.floats(-1.0, 1.0))
    def test_moments(self, q, u):
        g = VelocityGrid(24, default_extent(q) + abs(u))
        F = maxwellian(q, g, (u, 0.0, 0.0))
        n, m, e = moments(F, g)
        assert n == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(m, [u, 0, 0], atol=1e-8)
        assert e == pytest.approx(1.5 / q + 0.5 * u * u, rel=1e-7)

    def test_default_extent(self):
        assert default_extent(1.0) == 6.0
        assert default_extent(0.25, 2.0) == pytest.approx(12.0)

    def test_batched_integrate(self, g8):
        F = np.stack([maxwellian(1.0, g8), 2 * maxwellian(1.0, g8)])
        I = integrate(F, g8)
        assert I.shape == (2,)
        assert I[1] == pytest.approx(2 * I[0])


class TestWeights:
    def test_polynomial_weight_at_zero_speed_limit(self, g8):
        w = polynomial(4.0)(g8)
        assert np.all(w >= 1.0)

    def test_gaussian_overflow_guard(self):
        with pytest.raises(OverflowGuardError):
            gaussian(20.0)(VelocityGrid(8, 10.0))

    def test_weighted_l2_matches_manual(self, g8):
        F = maxwellian(1.0, g8)
        w = polynomial(2.0)(g8)
        ref = np.sqrt(np.sum((w * F) ** 2) * g8.cell_volume)
        assert weighted_l2(F, polynomial(2.0), g8) == pytest.approx(ref)

    def test_x_derivative_norm_of_constant_in_x(self, g8, x8):
        F = np.broadcast_to(maxwellian(1.0, g8), (8,) + g8.shape)
        base = weighted_l2(F, polynomial(0.0), g8, x8)
        assert x_derivative_norm(F, 3, g8, x8) == pytest.approx(base, rel=1e-12)


class TestDistributionField:
    def test_rejects_negative(self, g8):
        with pytest.raises(DomainError):
            DistributionField("ion", -maxwellian(1.0, g8), g8)

    def test_signed_allows_negative(self, g8):
        DistributionField("electron", -maxwellian(1.0, g8), g8, signed=True)

    def test_rejects_shape(self, g8, x8):
        with pytest.raises(DomainError):
            DistributionField("ion", maxwellian(1.0, g8), g8, x8)

    def test_rejects_species(self, g8):
        with pytest.raises(DomainError):
            DistributionField("photon", maxwellian(1.0, g8), g8)
