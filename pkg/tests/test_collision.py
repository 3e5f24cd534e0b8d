import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpl_limit.collision import (
    EntropyReport,
    FluxOperator,
    entropy_dissipation,
    gamma_bilinear,
    linearized_L,
    linearized_L_tilde,
    q_cross_minus_plus,
    q_cross_plus_minus,
    q_cross_plus_minus_limit,
    q_landau,
    q_landau_oracle,
)
from vpl_limit.hermite_macro import kernel_basis
from vpl_limit.landau_kernel import random_nonnegative_field
from vpl_limit.landau_kernel import sigma_exact, unpack
from vpl_limit.phase_grid import VelocityGrid, integrate, maxwellian, moments

EG = VelocityGrid(12, 6.0)
IG = VelocityGrid(12, 4.5)

# two shifted Maxwellians (q, u, weight); Q of the mixture has a closed form
MIX = [(1.0, np.array([0.4, 0.0, 0.0]), 1.0), (1.5, np.array([-0.3, 0.2, 0.0]), 0.5)]


def _mu(q, u, w, v):
    return w * (q / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * q * np.sum((v - u) ** 2, axis=-1))


def mixture(v):
    return sum(_mu(q, u, w, v) for q, u, w in MIX)


def _mixture_flux(v):
    # Phi * grad mu_a = -q_a sigma_a (v - u_a), so each pair gives sigma_a (q_a(v-u_a) - q_b(v-u_b)) mu_b
    J = np.zeros(v.shape)
    for qa, ua, wa in MIX:
        S = wa * unpack(sigma_exact(v - ua, qa))
        for qb, ub, wb in MIX:
            drift = (qa * (v - ua) - qb * (v - ub)) * _mu(qb, ub, wb, v)[..., None]
            J += np.einsum("...ij,...j->...i", S, drift)
    return J


def mixture_q(v, d=1e-4):
    out = 0.0
    for k in range(3):
        e = np.zeros(3)
        e[k] = d
        out = out + (_mixture_flux(v + e)[..., k] - _mixture_flux(v - e)[..., k]) / (2 * d)
    return out


class TestLandau:
    @given(st.integers(0, 2 ** 31))
    def test_mass_exact(self, seed):
        rng = np.random.default_rng(seed)
        F = random_nonnegative_field(EG, rng)
        G = random_nonnegative_field(EG, rng)
        Q = q_landau(F, G, EG)
        assert abs(integrate(Q, EG)) <= 1e-14 * integrate(np.abs(Q), EG)

    @pytest.mark.parametrize("q", [0.7, 1.0, 2.0])
    def test_reference_maxwellian_is_equilibrium(self, q):
        g = VelocityGrid(12, 6.0 / np.sqrt(min(q, 1.0)))
        M = maxwellian(q, g)
        assert np.abs(q_landau(M, M, g, q_ref=q)).max() < 1e-14

    def test_bilinear(self, rng):
        F, G, H = (random_nonnegative_field(EG, rng) for _ in range(3))
        lhs = q_landau(F, 2 * G - H, EG)
        rhs = 2 * q_landau(F, G, EG) - q_landau(F, H, EG)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_batched_cells(self, rng):
        F = np.stack([random_nonnegative_field(EG, rng) for _ in range(2)])
        out = q_landau(F, F, EG)
        np.testing.assert_allclose(out[1], q_landau(F[1], F[1], EG), atol=1e-15)

    def test_oracle_conserves(self, rng):
        F = random_nonnegative_field(VelocityGrid(8), rng)
        n, m, e = moments(q_landau_oracle(F, VelocityGrid(8)), VelocityGrid(8))
        assert abs(n) < 1e-14 and np.abs(m).max() < 1e-14 and abs(e) < 1e-13

    def test_converges_to_closed_form_mixture(self):
        errs = []
        for n in (12, 16, 24):
            g = VelocityGrid(n, 6.0)
            F = mixture(g.points).reshape(g.shape)
            exact = mixture_q(g.points).reshape(g.shape)
            errs.append(np.abs(q_landau(F, F, g) - exact).max() / np.abs(exact).max())
        assert errs[1] < 0.15
        assert errs[0] > errs[1] > errs[2]


class TestEntropy:
    @given(st.integers(0, 2 ** 31))
    def test_nonnegative(self, seed):
        F = random_nonnegative_field(EG, np.random.default_rng(seed)) + 1e-12
        assert entropy_dissipation(F, EG) >= -1e-10

    def test_zero_at_equilibrium(self):
        assert abs(entropy_dissipation(maxwellian(1.0, EG), EG)) < 1e-12

    def test_report(self, rng):
        rep = entropy_dissipation(random_nonnegative_field(EG, rng), EG, report=True)
        assert isinstance(rep, EntropyReport)
        assert rep.symmetric >= 0


class TestLinearized:
    def test_kernel_annihilated(self):
        for k in kernel_basis(1.0, EG):
            assert np.abs(linearized_L(k, 1.0, EG)).max() < 1e-12

    @given(st.integers(0, 2 ** 31))
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal(EG.shape) * np.sqrt(maxwellian(1.0, EG))
        assert np.sum(linearized_L(h, 1.0, EG) * h) >= -1e-12

    def test_tilde_reduces_to_L(self, rng):
        h = rng.standard_normal(EG.shape) * maxwellian(1.0, EG) ** 0.5
        np.testing.assert_allclose(linearized_L_tilde(h, 1.0, 1.0, EG), linearized_L(h, 1.0, EG),
                                   atol=1e-13)

    def test_gamma_bilinear_on_root_maxwellian(self):
        r = np.sqrt(maxwellian(1.0, EG))
        assert np.abs(gamma_bilinear(r, r, 1.0, EG)).max() < 1e-12


class TestCross:
    def test_minus_plus_vanishes_linearly(self):
        Fe, Fi = maxwellian(1.0, EG), maxwellian(2.0, IG)
        a = np.abs(q_cross_minus_plus(Fe, Fi, 0.2, EG, IG, q_i=2.0)).max()
        b = np.abs(q_cross_minus_plus(Fe, Fi, 0.1, EG, IG, q_i=2.0)).max()
        assert a / b == pytest.approx(2.0, rel=0.1)

    def test_minus_plus_mass(self, rng):
        Fe = random_nonnegative_field(EG, rng)
        Fi = maxwellian(2.0, IG)
        assert abs(integrate(q_cross_minus_plus(Fe, Fi, 0.1, EG, IG, q_i=2.0), IG)) < 1e-15

    def test_plus_minus_limit(self, rng):
        F = random_nonnegative_field(EG, rng)
        Fi = maxwellian(2.0, IG)
        lim = q_cross_plus_minus_limit(1.0, F, EG)
        full = q_cross_plus_minus(Fi, F, 0.01, IG, EG, q_i=2.0)
        assert np.abs(full - lim).max() < 1e-3 * np.abs(lim).max()

    def test_limit_annihilates_radial(self):
        assert np.abs(q_cross_plus_minus_limit(1.0, maxwellian(1.0, EG), EG)).max() < 1e-14

    def test_flux_operator_mass(self, rng):
        op = FluxOperator(EG)
        G = random_nonnegative_field(EG, rng)
        Q = op.apply(op.self_coefficients(G), G)
        assert abs(integrate(Q, EG)) <= 1e-14 * integrate(np.abs(Q), EG)
