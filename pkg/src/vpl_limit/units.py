"""Physical scales of a two-species plasma and the resulting dimensionless numbers.

Gaussian units.  With ``unit_charge=True`` the elementary charge is 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

from .phase_grid import DomainError

__all__ = ["PhysicalParameters", "Scales", "nondim", "ELEMENTARY_CHARGE_CGS"]

ELEMENTARY_CHARGE_CGS = 4.80320471e-10  # statcoulomb


@dataclass(frozen=True)
class PhysicalParameters:
    """Ion mass, electron mass, temperature ``theta``, density ``N`` and ion charge ``Z``.

    ``ln_Lambda`` is a positive number or ``"auto"`` (``ln(lambda_D / b_0)``).
    """

    m_plus: float
    m_minus: float
    theta: float
    N: float
    Z: float = 1.0
    ln_Lambda: Union[float, str] = "auto"
    unit_charge: bool = True

    def __post_init__(self):
        for key in ("m_plus", "m_minus", "theta", "N", "Z"):
            val = getattr(self, key)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise DomainError(f"{key}: must be a positive number, got {val!r}")
        if self.ln_Lambda != "auto":
            if not (isinstance(self.ln_Lambda, (int, float)) and self.ln_Lambda > 0):
                raise DomainError(f"ln_Lambda: must be positive or 'auto', got {self.ln_Lambda!r}")

    @property
    def charge(self) -> float:
        return 1.0 if self.unit_charge else ELEMENTARY_CHARGE_CGS


@dataclass(frozen=True)
class Scales:
    eps: float
    kappa: float
    lambda_D: float
    b_0: float
    ln_Lambda: float
    T_plus: float
    T_minus: float
    V_plus: float
    V_minus: float
    X: float

    def to_dict(self) -> dict:
        return asdict(self)


def nondim(params: Optional[PhysicalParameters] = None, **kwargs) -> Scales:
    """Debye length, impact parameter, reference scales and ``(eps, kappa)``.

    Parameters
    ----------
    params : PhysicalParameters, optional
        Alternatively pass the fields as keyword arguments.

    Returns
    -------
    Scales
        ``lambda_D = (theta / 4 pi e^2 N)^{1/2}``, ``b_0 = 3 theta / (Z e^2)``,
        ``V_pm = (theta/m_pm)^{1/2}``, ``X = (theta/(N e^2))^{1/2}``,
        ``T_pm = X / V_pm``, ``eps = (m_-/m_+)^{1/2}`` and
        ``1/kappa = 2 pi ln(Lambda) N^{1/2} e^3 / theta^{3/2}``.

    Raises
    ------
    DomainError
        If ``ln_Lambda='auto'`` and ``lambda_D <= b_0``.
    """
    p = params if params is not None else PhysicalParameters(**kwargs)
    e = p.charge
    lambda_D = math.sqrt(p.theta / (4.0 * math.pi * e ** 2 * p.N))
    b_0 = 3.0 * p.theta / (p.Z * e ** 2)
    if p.ln_Lambda == "auto":
        if lambda_D <= b_0:
            raise DomainError(
                f"ln_Lambda: lambda_D = {lambda_D:.6g} <= b_0 = {b_0:.6g}, so ln(lambda_D/b_0) "
                "is not a valid Coulomb logarithm; set ln_Lambda manually")
        ln_L = math.log(lambda_D / b_0)
    else:
        ln_L = float(p.ln_Lambda)
    V_plus = math.sqrt(p.theta / p.m_plus)
    V_minus = math.sqrt(p.theta / p.m_minus)
    X = math.sqrt(p.theta / (p.N * e ** 2))
    kappa_inv = 2.0 * math.pi * ln_L * math.sqrt(p.N) * e ** 3 / p.theta ** 1.5
    return Scales(
        eps=math.sqrt(p.m_minus / p.m_plus),
        kappa=1.0 / kappa_inv,
        lambda_D=lambda_D,
        b_0=b_0,
        ln_Lambda=ln_L,
        T_plus=X / V_plus,
        T_minus=X / V_minus,
        V_plus=V_plus,
        V_minus=V_minus,
        X=X,
    )
