import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vpl_limit.landau_kernel import (
    CapabilityError,
    NormSpec,
    SingularityError,
    conv_phi,
    norm,
    pack,
    phi,
    phi_cell_average,
    random_nonnegative_field,
    sigma,
    sigma_exact,
    unpack,
    verify_kernel_bounds,
)
from vpl_limit.phase_grid import VelocityGrid, maxwellian

nonzero_vec = arrays(np.float64, 3, elements=st.floats(-10, 10)).filter(
    lambda z: np.linalg.norm(z) > 1e-3)


class TestPhi:
    def test_unit_axis(self):
        np.testing.assert_array_equal(phi((1.0, 0.0, 0.0)), np.diag([0.0, 1.0, 1.0]))

    def test_singular(self):
        with pytest.raises(SingularityError):
            phi((0.0, 0.0, 0.0))

    @given(nonzero_vec)
    def test_annihilates_argument(self, z):
        assert np.linalg.norm(phi(z) @ z) <= 1e-14

    @given(nonzero_vec)
    def test_trace(self, z):
        assert np.trace(phi(z)) == pytest.approx(2.0 / np.linalg.norm(z), rel=1e-13)

    @given(nonzero_vec, st.floats(0.1, 10.0))
    def test_homogeneous_degree_minus_one(self, z, lam):
        np.testing.assert_allclose(phi(lam * z), phi(z) / lam, rtol=1e-12, atol=1e-14)

    @given(nonzero_vec)
    def test_symmetric_psd(self, z):
        P = phi(z)
        np.testing.assert_allclose(P, P.T)
        assert np.linalg.eigvalsh(P).min() >= -1e-14

    def test_cell_average_origin_isotropic(self):
        A = phi_cell_average((0.0, 0.0, 0.0), 0.5)
        np.testing.assert_allclose(A, A[0, 0] * np.eye(3), atol=1e-14)

    def test_cell_average_far_matches_point(self):
        c = np.array([10.0, 0.0, 0.0])
        np.testing.assert_allclose(phi_cell_average(c, 0.1), phi(c), rtol=1e-4, atol=1e-5)


class TestPacking:
    @given(arrays(np.float64, (4, 3, 3), elements=st.floats(-5, 5)))
    def test_roundtrip(self, M):
        S = 0.5 * (M + np.swapaxes(M, -1, -2))
        np.testing.assert_allclose(unpack(pack(S)), S)


class TestConvolution:
    def test_fft_matches_direct(self, g12):
        G = maxwellian(1.0, g12) + 0.3 * maxwellian(2.0, g12, (1.0, -0.5, 0.0))
        a = conv_phi(G, g12, "fft")
        b = conv_phi(G, g12, "direct")
        assert np.abs(a.packed - b.packed).max() <= 1e-12 * np.abs(b.packed).max()

    def test_direct_rejects_large_grid(self):
        g = VelocityGrid(26)
        with pytest.raises(CapabilityError):
            conv_phi(np.zeros(g.shape), g, "direct")

    def test_direct_rejects_cell_kernel(self, g8):
        with pytest.raises(CapabilityError):
            conv_phi(np.zeros(g8.shape), g8, "direct", kernel="cell")

    def test_linearity(self, g8, rng):
        A, B = rng.random(g8.shape), rng.random(g8.shape)
        lhs = conv_phi(2 * A - B, g8).packed
        rhs = 2 * conv_phi(A, g8).packed - conv_phi(B, g8).packed
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_batched(self, g8, rng):
        A = rng.random((2,) + g8.shape)
        out = conv_phi(A, g8).packed
        np.testing.assert_allclose(out[1], conv_phi(A[1], g8).packed, atol=1e-14)

    def test_psd_for_nonnegative_G(self, g12, rng):
        G = random_nonnegative_field(g12, rng)
        assert conv_phi(G, g12).eigvalsh().min() >= -1e-12


class TestSigma:
    def test_matches_closed_form(self, g16):
        s = sigma(g16)
        ex = sigma_exact(g16.points).reshape(s.packed.shape)
        r = np.sqrt(g16.speed_squared)
        inner = r < 4
        err = np.abs(s.packed - ex)[inner].max() / np.abs(ex).max()
        assert err < 2e-2

    @pytest.mark.parametrize("q", [0.5, 2.0])
    def test_closed_form_temperature_scaling(self, q):
        pts = np.array([[0.3, 1.0, -2.0], [3.0, 0.0, 0.0]])
        # Phi * mu_q (v) = sqrt(q) (Phi * mu_1)(sqrt(q) v)
        np.testing.assert_allclose(sigma_exact(pts, q), np.sqrt(q) * sigma_exact(np.sqrt(q) * pts),
                                   rtol=1e-12)

    def test_closed_form_eigen_scaling(self):
        v = np.array([[r, 0.0, 0.0] for r in np.linspace(2, 20, 10)])
        lam = np.linalg.eigvalsh(unpack(sigma_exact(v)))
        jap = np.sqrt(1 + np.sum(v * v, axis=1))
        assert np.all((lam[:, 0] * jap ** 3 > 0.2) & (lam[:, 0] * jap ** 3 < 5))
        assert np.all((lam[:, 2] * jap > 0.2) & (lam[:, 2] * jap < 5))


class TestNorms:
    def test_kinds(self):
        with pytest.raises(ValueError):
            NormSpec("H_plus_eps")
        with pytest.raises(ValueError):
            NormSpec("H_sigma", eps=0.1)
        with pytest.raises(ValueError):
            NormSpec("bogus")

    def test_dot_norm_smaller(self, g12):
        h = maxwellian(1.0, g12)
        assert 0 < norm(h, NormSpec("Hdot_sigma"), g12) < norm(h, NormSpec("H_sigma"), g12)

    @given(st.floats(0.1, 10.0))
    def test_homogeneous_degree_one(self, c):
        g = VelocityGrid(8)
        h = maxwellian(1.0, g, (0.5, 0.0, 0.0))
        base = norm(h, NormSpec("H_sigma"), g)
        assert norm(c * h, NormSpec("H_sigma"), g) == pytest.approx(c * base, rel=1e-10)

    def test_spatial_axis_integrates(self, g8, x8):
        h = maxwellian(1.0, g8)
        hx = np.broadcast_to(h, (8,) + g8.shape)
        assert norm(hx, NormSpec("H_sigma"), g8, x8) == pytest.approx(
            norm(h, NormSpec("H_sigma"), g8), rel=1e-12)


class TestBounds:
    def test_random_field_nonnegative(self, g12, rng):
        for _ in range(5):
            assert random_nonnegative_field(g12, rng).min() >= 0

    def test_no_violations_small(self, g12, rng):
        fields = [random_nonnegative_field(g12, rng) for _ in range(3)]
        rep = verify_kernel_bounds(fields, g12, 30, rng)
        assert rep.violations == 0
        assert rep.trials == 90
        assert rep.upper_ratio_max <= 1.0
        assert rep.lower_ratio_min >= 1.0
