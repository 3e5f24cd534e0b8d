import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpl_limit.phase_grid import DomainError
from vpl_limit.units import ELEMENTARY_CHARGE_CGS, PhysicalParameters, nondim

BASE = dict(m_plus=1.0, m_minus=0.005, theta=1.0, N=1e-4)


def test_hydrogen_mass_ratio():
    assert nondim(**BASE).eps == pytest.approx(math.sqrt(0.005), rel=1e-12)
    assert nondim(**BASE).eps == pytest.approx(0.0707, abs=1e-4)


def test_equal_masses():
    s = nondim(**{**BASE, "m_minus": 1.0})
    assert s.eps == 1.0
    assert s.T_minus == pytest.approx(s.T_plus)


def test_doubling_theta_scales_inverse_kappa():
    a = nondim(**BASE, ln_Lambda=10.0)
    b = nondim(**{**BASE, "theta": 2.0}, ln_Lambda=10.0)
    assert (1 / b.kappa) / (1 / a.kappa) == pytest.approx(2 ** -1.5, rel=1e-12)


def test_formulas():
    s = nondim(**BASE)
    assert s.lambda_D == pytest.approx(math.sqrt(1.0 / (4 * math.pi * 1e-4)))
    assert s.b_0 == pytest.approx(3.0)
    assert s.ln_Lambda == pytest.approx(math.log(s.lambda_D / 3.0))
    assert s.X == pytest.approx(100.0)
    assert s.T_plus == pytest.approx(s.X / s.V_plus)
    assert set(s.to_dict()) >= {"eps", "kappa", "lambda_D", "b_0", "T_plus", "V_minus", "X"}


def test_auto_log_fails_when_debye_short():
    with pytest.raises(DomainError, match="ln_Lambda"):
        nondim(**{**BASE, "N": 1.0})
    assert nondim(**{**BASE, "N": 1.0}, ln_Lambda=5.0).ln_Lambda == 5.0


def test_physical_charge():
    p = PhysicalParameters(**BASE, ln_Lambda=10.0, unit_charge=False)
    assert p.charge == ELEMENTARY_CHARGE_CGS
    assert nondim(p).lambda_D > nondim(**BASE, ln_Lambda=10.0).lambda_D


@pytest.mark.parametrize("key", ["m_plus", "m_minus", "theta", "N", "Z"])
def test_rejects_nonpositive(key):
    with pytest.raises(DomainError, match=key):
        PhysicalParameters(**{**BASE, key: 0.0} if key in BASE else {**BASE, key: -1.0})


def test_rejects_bad_log():
    with pytest.raises(DomainError, match="ln_Lambda"):
        PhysicalParameters(**BASE, ln_Lambda=-2.0)


@given(st.floats(1e-6, 1.0), st.floats(0.1, 10.0))
def test_eps_depends_only_on_ratio(r, m):
    s = nondim(m_plus=m, m_minus=r * m, theta=1.0, N=1e-6, ln_Lambda=10.0)
    assert s.eps == pytest.approx(math.sqrt(r), rel=1e-12)
