import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpl_limit.field_solver import solve_poincare_poisson
from vpl_limit.hermite_macro import (
    HermiteIndex,
    MacroState,
    TrajectoryFrame,
    hermite_basis,
    hermite_fn,
    kernel_basis,
    ladder_lower,
    ladder_raise,
    law_polynomials,
    macro_residuals,
    macro_variables,
    project,
)
from vpl_limit.phase_grid import DomainError, SpatialGrid, VelocityGrid, maxwellian

G24 = VelocityGrid(24, 7.0)


def inner(a, b, g):
    return float(np.sum(a * b) * g.cell_volume)


class TestHermiteIndex:
    def test_sorted_and_alpha(self):
        idx = HermiteIndex((2, 0, 2))
        assert idx.orders == (0, 2, 2)
        assert idx.alpha == (1, 0, 2)
        assert idx.norm_squared == 2

    @pytest.mark.parametrize("orders", [(3,), (0, 0, 0, 0, 0), (-1,)])
    def test_rejects(self, orders):
        with pytest.raises(DomainError):
            HermiteIndex(orders)


class TestBasis:
    @pytest.mark.parametrize("gamma", [0.8, 1.0, 2.0])
    def test_gram_identity(self, gamma):
        g = VelocityGrid(24, 6.0 / np.sqrt(min(gamma, 1.0)) + 1.0)
        _, B = hermite_basis(3, gamma, g)
        G = np.einsum("aijk,bijk->ab", B, B) * g.cell_volume
        np.testing.assert_allclose(G, np.eye(len(B)), atol=1e-6)

    def test_basis_count(self, g8):
        alphas, B = hermite_basis(2, 1.0, g8)
        assert len(alphas) == 10 and B.shape == (10,) + g8.shape

    def test_kernel_orthonormal(self):
        K = kernel_basis(1.0, G24)
        G = np.einsum("aijk,bijk->ab", K, K) * G24.cell_volume
        np.testing.assert_allclose(G, np.eye(5), atol=1e-8)

    def test_second_order_pair_norm(self):
        # <h_jk, h_ll> with unnormalized functions
        e = [[hermite_fn((j, k), 1.0, G24) for k in range(3)] for j in range(3)]
        for j in range(3):
            for k in range(3):
                for ll in range(3):
                    want = 2.0 if j == k == ll else 0.0
                    assert inner(e[j][k], e[ll][ll], G24) == pytest.approx(want, abs=1e-8)

    def test_rejects_nonpositive_gamma(self, g8):
        with pytest.raises(DomainError):
            hermite_fn((), 0.0, g8)


class TestLadder:
    @pytest.mark.parametrize("j", [0, 1, 2])
    def test_raise_builds_next(self, j):
        h0 = hermite_fn((), 2.0, G24)
        np.testing.assert_allclose(ladder_raise(h0, j, 2.0, G24), hermite_fn((j,), 2.0, G24),
                                   atol=1e-6)

    @pytest.mark.parametrize("j", [0, 1, 2])
    def test_lower_annihilates_ground(self, j):
        assert np.abs(ladder_lower(hermite_fn((), 2.0, G24), j, 2.0, G24)).max() < 1e-6

    def test_adjoint(self, rng):
        a = rng.standard_normal(G24.shape) * maxwellian(1.0, G24) ** 0.5
        b = rng.standard_normal(G24.shape) * maxwellian(1.0, G24) ** 0.5
        lhs = inner(ladder_lower(a, 0, 1.0, G24), b, G24)
        rhs = inner(a, ladder_raise(b, 0, 1.0, G24), G24)
        assert lhs == pytest.approx(rhs, abs=1e-6)

    def test_stencil_method_consistent(self):
        h = hermite_fn((1,), 1.0, G24)
        a = ladder_lower(h, 1, 1.0, G24, method="stencil")
        b = ladder_lower(h, 1, 1.0, G24, method="spectral")
        assert np.abs(a - b).max() < 1e-2


class TestProjection:
    @given(st.integers(0, 2 ** 31))
    def test_perpendicular_part_orthogonal(self, seed):
        g = VelocityGrid(12, 6.0)
        f = np.random.default_rng(seed).standard_normal(g.shape) * maxwellian(1.0, g) ** 0.5
        _, fp = project(f, 1.0, g)
        K = kernel_basis(1.0, g)
        assert np.abs(np.einsum("aijk,ijk->a", K, fp) * g.cell_volume).max() < 1e-12

    def test_projection_idempotent(self, rng):
        g = VelocityGrid(12, 6.0)
        f = rng.standard_normal(g.shape) * maxwellian(1.0, g) ** 0.5
        _, fp = project(f, 1.0, g)
        _, fpp = project(fp, 1.0, g)
        np.testing.assert_allclose(fpp, fp, atol=1e-13)

    def test_macro_variables_of_equilibrium(self, g12, x8):
        psi = 0.1 * np.sin(2 * np.pi * x8.nodes)
        F = np.exp(psi)[:, None, None, None] * maxwellian(1.0, g12)
        ms = macro_variables(F, 1.0, psi, g12)
        assert isinstance(ms, MacroState)
        assert np.abs(ms.as_array()).max() < 1e-13

    def test_macro_variables_density(self, g12):
        F = 1.1 * maxwellian(1.0, g12)
        ms = macro_variables(F, 1.0, 0.0, g12)
        assert float(ms.a) == pytest.approx(0.1, rel=1e-6)


class TestLaws:
    def test_polynomials_shape(self):
        P = law_polynomials()
        assert [len(P[k]) for k in ("mass", "momentum", "energy", "third")] == [1, 3, 1, 3]
        assert sum(c * c for c in P["energy"][0].values()) == pytest.approx(0.5)

    def test_needs_three_frames(self, g8, x8):
        F = np.broadcast_to(maxwellian(1.0, g8), (8,) + g8.shape)
        fr = TrajectoryFrame(0.0, F, np.zeros(8), 1.0, np.zeros(8))
        with pytest.raises(DomainError):
            macro_residuals([fr, fr], 0.1, x8, g8)

    def test_rejects_unsorted_times(self, g8, x8):
        F = np.broadcast_to(maxwellian(1.0, g8), (8,) + g8.shape)
        frs = [TrajectoryFrame(t, F, np.zeros(8), 1.0, np.zeros(8)) for t in (0.0, 0.2, 0.1)]
        with pytest.raises(DomainError):
            macro_residuals(frs, 0.1, x8, g8)

    def test_collisionless_equilibrium_residual(self):
        xg, eg = SpatialGrid(16), VelocityGrid(20, 8.0)
        n_plus = 1 + 0.3 * np.cos(2 * np.pi * xg.nodes)
        psi = solve_poincare_poisson(n_plus, 1.0, 1.0, xg)
        E = -xg.derivative(psi)
        F = np.exp(psi)[:, None, None, None] * maxwellian(1.0, eg)
        frames = [TrajectoryFrame(t, F, E, 1.0, psi) for t in (0.0, 0.1, 0.2)]
        res = macro_residuals(frames, 0.1, xg, eg, collisions=False)
        assert max(max(r[1:]) for r in res.rows()) < 1e-9
