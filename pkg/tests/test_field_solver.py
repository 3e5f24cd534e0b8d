import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpl_limit.errors import CompatibilityError, ConsistencyError
from vpl_limit.field_solver import (
    IonData,
    PoincarePoissonResult,
    apply_pp_operator,
    evolve_pp,
    field_energy,
    gamma_dot,
    gamma_from_invariant,
    invert_pp_operator,
    mb_poisson_limit,
    pp_invariant,
    solve_poincare_poisson,
    solve_poisson,
)
from vpl_limit.phase_grid import DomainError, SpatialGrid

XG = SpatialGrid(32)
X = XG.nodes
FOUR_PI = 4 * np.pi


def manufactured(gamma, a=0.05, b=0.02):
    """``psi`` and the ion density that makes it an exact solution."""
    psi = a * np.cos(2 * np.pi * X) + b * np.sin(4 * np.pi * X)
    mass = XG.integrate(np.exp(gamma * psi))
    psi = psi - np.log(mass) / gamma
    n_plus = np.exp(gamma * psi) - XG.derivative(psi, order=2) / FOUR_PI
    return psi, n_plus


class TestPoisson:
    def test_sine(self):
        n_plus = 1 + 0.5 * np.cos(2 * np.pi * X)
        phi, E = solve_poisson(n_plus, np.ones_like(X), XG)
        exact = 0.5 * FOUR_PI / (2 * np.pi) ** 2 * np.cos(2 * np.pi * X)
        np.testing.assert_allclose(phi, exact, atol=1e-12)
        np.testing.assert_allclose(E, -XG.derivative(phi), atol=1e-12)

    def test_incompatible(self):
        with pytest.raises(CompatibilityError):
            solve_poisson(np.ones(32), 0.5 * np.ones(32), XG)

    def test_field_energy(self):
        E = np.cos(2 * np.pi * X)
        assert field_energy(E, XG) == pytest.approx(0.5 / (8 * np.pi))


class TestPoincarePoisson:
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.5])
    def test_manufactured(self, gamma):
        psi, n_plus = manufactured(gamma)
        res = solve_poincare_poisson(n_plus, gamma, 1.0, XG, tol=1e-13, full_output=True)
        assert isinstance(res, PoincarePoissonResult)
        np.testing.assert_allclose(res.psi, psi, atol=1e-8)

    def test_gibbs_density_exact_start(self):
        n_plus = np.ones(32)
        psi = solve_poincare_poisson(n_plus, 1.0, 1.0, XG)
        np.testing.assert_allclose(psi, 0.0, atol=1e-14)

    def test_quadratic_newton(self):
        psi, n_plus = manufactured(1.0, a=0.12)
        res = solve_poincare_poisson(n_plus, 1.0, 1.0, XG, tol=1e-14, psi0=np.zeros(32),
                                     full_output=True)
        r = [x for x in res.residuals if x > 1e-12]
        assert len(r) >= 3
        # e_{k+1} ~ C e_k^2 on the tail
        orders = [np.log(r[k + 1] / r[k]) / np.log(r[k] / r[k - 1]) for k in range(1, len(r) - 1)]
        assert max(orders[-2:]) > 1.7

    def test_rejects(self):
        with pytest.raises(DomainError):
            solve_poincare_poisson(np.ones(32), -1.0, 1.0, XG)
        with pytest.raises(DomainError):
            solve_poincare_poisson(-np.ones(32), 1.0, -1.0, XG)
        with pytest.raises(CompatibilityError):
            solve_poincare_poisson(np.ones(32), 1.0, 2.0, XG)

    def test_mb_limit_alias(self):
        psi, n_plus = manufactured(1.5)
        np.testing.assert_allclose(mb_poisson_limit(n_plus, 1.5, XG), psi, atol=1e-8)


class TestOperator:
    @given(st.integers(0, 2 ** 31))
    def test_inverse(self, seed):
        rng = np.random.default_rng(seed)
        psi = 0.3 * rng.standard_normal(32)
        u = rng.standard_normal(32)
        rhs = apply_pp_operator(u, 1.2, psi, XG)
        np.testing.assert_allclose(invert_pp_operator(rhs, 1.2, psi, XG), u, atol=1e-9)

    def test_positive(self, rng):
        psi = 0.3 * np.sin(2 * np.pi * X)
        for _ in range(5):
            u = rng.standard_normal(32)
            lower = 1.2 * np.exp(1.2 * psi).min() * XG.integrate(u * u)
            assert XG.integrate(u * apply_pp_operator(u, 1.2, psi, XG)) >= lower * (1 - 1e-12)


class TestGamma:
    @given(st.floats(0.3, 3.0), st.floats(0.0, 0.1))
    def test_denominator_bound(self, gamma, a):
        psi, _ = manufactured(gamma, a=a)
        gd = gamma_dot(np.sin(2 * np.pi * X), 0.1, gamma, psi, XG, full_output=True)
        assert gd.denominator >= 1.5 / gamma ** 2 * (1 - 1e-10)

    def test_denominator_violation_raises(self, monkeypatch):
        import vpl_limit.field_solver as fs

        psi, _ = manufactured(1.0)
        monkeypatch.setattr(fs, "invert_pp_operator", lambda rhs, *a, **k: -10 * rhs)
        with pytest.raises(ConsistencyError):
            fs.gamma_dot(np.zeros(32), 0.0, 1.0, psi, XG)

    def test_gamma_from_invariant_roundtrip(self):
        _, n_plus = manufactured(1.3)
        psi = solve_poincare_poisson(n_plus, 1.3, 1.0, XG)
        inv = pp_invariant(1.3, 0.7, psi, XG)
        g, psi2 = gamma_from_invariant(n_plus, 0.7, inv, XG, 1.0, guess=1.0)
        assert g == pytest.approx(1.3, rel=1e-10)
        np.testing.assert_allclose(psi2, psi, atol=1e-9)

    def test_evolve_conserves_invariant(self):
        def ion(t):
            n = 1 + 0.2 * np.cos(2 * np.pi * (X - 0.3 * t))
            dn = 0.2 * 0.3 * 2 * np.pi * np.sin(2 * np.pi * (X - 0.3 * t))
            return IonData(n, dn, 1.0 + 0.1 * t, 0.1)

        traj = evolve_pp(ion, 1.0, 0.5, 0.05, XG)
        assert np.ptp(traj.invariant) < 1e-6
        assert traj.times[-1] == pytest.approx(0.5)
