"""Electrostatic field solves on the periodic interval.

* the linear Poisson equation ``-phi'' = 4 pi (n_+ - n_-)``;
* the nonlinear Poincare-Poisson equation ``-psi'' = 4 pi (n_+ - e^{gamma psi})``
  by damped Newton iteration;
* the rate ``gamma'`` that keeps
  ``3/(2 gamma) + K_+ + |psi'|^2/(8 pi)`` constant, and its RK4 integration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, cg

from .errors import BlowUpError, CompatibilityError, ConsistencyError, NonConvergenceError
from .phase_grid import DomainError, SpatialGrid

__all__ = [
    "FieldState",
    "PoincarePoissonResult",
    "GammaDot",
    "IonData",
    "PPTrajectory",
    "solve_poisson",
    "solve_poincare_poisson",
    "apply_pp_operator",
    "invert_pp_operator",
    "gamma_dot",
    "pp_invariant",
    "field_energy",
    "gamma_from_invariant",
    "evolve_pp",
    "mb_poisson_limit",
]

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class FieldState:
    """Potential and field of the coupled system with the intermediary pair."""

    phi: np.ndarray
    E: np.ndarray
    gamma: float
    psi: np.ndarray


def _laplacian_symbol(xgrid: SpatialGrid) -> np.ndarray:
    return -xgrid.wavenumbers ** 2


def _laplacian(f: np.ndarray, xgrid: SpatialGrid) -> np.ndarray:
    return np.real(np.fft.ifft(_laplacian_symbol(xgrid) * np.fft.fft(f)))


def field_energy(E: np.ndarray, xgrid: SpatialGrid) -> float:
    """``int |E|^2 dx / (8 pi)``."""
    return float(xgrid.integrate(np.asarray(E) ** 2)) / (2 * FOUR_PI)


def solve_poisson(n_plus: np.ndarray, n_minus: np.ndarray, xgrid: SpatialGrid,
                  tol: float = 1e-10):
    """Zero-mean solution of ``-phi'' = 4 pi (n_plus - n_minus)`` and ``E = -phi'``.

    Raises
    ------
    CompatibilityError
        If the net charge ``int (n_plus - n_minus)`` exceeds ``tol`` relative
        to ``int n_plus``.
    """
    rho = np.asarray(n_plus, float) - np.asarray(n_minus, float)
    net = float(xgrid.integrate(rho))
    scale = max(1.0, float(xgrid.integrate(np.abs(n_plus))))
    if abs(net) > tol * scale:
        raise CompatibilityError(f"net charge {net:.3e} violates torus solvability", net)
    k2 = xgrid.wavenumbers ** 2
    rhat = np.fft.fft(rho)
    phat = np.zeros_like(rhat)
    phat[1:] = FOUR_PI * rhat[1:] / k2[1:]
    phi = np.real(np.fft.ifft(phat))
    return phi, -xgrid.derivative(phi)


# ---------------------------------------------------------------------------
# Poincare-Poisson


@dataclass
class PoincarePoissonResult:
    psi: np.ndarray
    iterations: int
    residuals: List[float]
    steps: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "residuals": list(map(float, self.residuals)),
                "steps": list(map(float, self.steps))}


def _pp_residual(psi, n_plus, gamma, xgrid):
    return -_laplacian(psi, xgrid) / FOUR_PI - n_plus + np.exp(gamma * psi)


def _l2(f, xgrid) -> float:
    return float(np.sqrt(xgrid.integrate(f * f)))


def _laplacian_matrix(xgrid: SpatialGrid) -> np.ndarray:
    n = xgrid.n_cells
    return np.real(np.fft.ifft(_laplacian_symbol(xgrid)[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))


def solve_poincare_poisson(n_plus: np.ndarray, gamma: float, electron_mass: float,
                           xgrid: SpatialGrid, tol: float = 1e-10, max_iter: int = 50,
                           psi0: Optional[np.ndarray] = None,
                           full_output: bool = False):
    """Solve ``-psi'' = 4 pi (n_plus - e^{gamma psi})`` by damped Newton.

    The Newton matrix ``gamma e^{gamma psi} - Laplacian/(4 pi)`` is dense but
    small.  Steps are halved until the residual decreases.  The default
    initial guess ``ln(n_plus)/gamma``, shifted to the prescribed mass, is
    exact for Gibbs densities.

    Returns
    -------
    ndarray or PoincarePoissonResult
        ``psi``, normalized so that ``int e^{gamma psi} = electron_mass``.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    n_plus = np.asarray(n_plus, dtype=float)
    if np.any(n_plus <= 0):
        raise DomainError("n_plus must be positive")
    mass = float(xgrid.integrate(n_plus))
    if abs(mass - electron_mass) > 1e-8 * max(1.0, abs(electron_mass)):
        raise CompatibilityError(
            f"ion mass {mass:.12g} differs from electron mass {electron_mass:.12g}", mass - electron_mass)
    if psi0 is None:
        psi = np.log(n_plus) / gamma
    else:
        psi = np.array(psi0, dtype=float)
    psi = psi + np.log(electron_mass / xgrid.integrate(np.exp(gamma * psi))) / gamma
    lap = _laplacian_matrix(xgrid)
    R = _pp_residual(psi, n_plus, gamma, xgrid)
    history = [_l2(R, xgrid)]
    steps: List[float] = []
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"Poincare-Poisson Newton stalled at residual {history[-1]:.3e}",
                                      history)
        J = np.diag(gamma * np.exp(gamma * psi)) - lap / FOUR_PI
        delta = np.linalg.solve(J, -R)
        lam = 1.0
        while True:
            trial = psi + lam * delta
            Rt = _pp_residual(trial, n_plus, gamma, xgrid)
            rt = _l2(Rt, xgrid)
            if rt < history[-1] or lam < 1e-6:
                break
            lam *= 0.5
        if rt >= history[-1]:
            raise NonConvergenceError("Poincare-Poisson line search failed", history + [rt])
        psi, R = trial, Rt
        history.append(rt)
        steps.append(lam)
        it += 1
    # the equation fixes the mass; remove the rounding-level remainder
    psi = psi + np.log(electron_mass / xgrid.integrate(np.exp(gamma * psi))) / gamma
    if full_output:
        return PoincarePoissonResult(psi, it, history, steps)
    return psi


def mb_poisson_limit(n_plus: np.ndarray, beta: float, xgrid: SpatialGrid,
                     electron_mass: Optional[float] = None, **kwargs) -> np.ndarray:
    """Maxwell-Boltzmann potential of the limit system, ``-phi'' = 4 pi (n_plus - e^{beta phi})``."""
    if electron_mass is None:
        electron_mass = float(xgrid.integrate(n_plus))
    return solve_poincare_poisson(n_plus, beta, electron_mass, xgrid, **kwargs)


def apply_pp_operator(u: np.ndarray, gamma: float, psi: np.ndarray, xgrid: SpatialGrid) -> np.ndarray:
    """``(gamma e^{gamma psi} - Laplacian/(4 pi)) u``."""
    return gamma * np.exp(gamma * psi) * u - _laplacian(u, xgrid) / FOUR_PI


def invert_pp_operator(rhs: np.ndarray, gamma: float, psi: np.ndarray, xgrid: SpatialGrid,
                       tol: float = 1e-12) -> np.ndarray:
    """Solve with the symmetric positive operator by preconditioned conjugate gradients.

    The preconditioner is the constant-coefficient operator with the mean of
    ``gamma e^{gamma psi}``, inverted in Fourier space.
    """
    n = xgrid.n_cells
    w = gamma * np.exp(gamma * np.asarray(psi, float))
    sym = w.mean() + xgrid.wavenumbers ** 2 / FOUR_PI
    A = LinearOperator((n, n), matvec=lambda u: w * u - _laplacian(u, xgrid) / FOUR_PI, dtype=float)
    M = LinearOperator((n, n), matvec=lambda r: np.real(np.fft.ifft(np.fft.fft(r) / sym)), dtype=float)
    rhs = np.asarray(rhs, float)
    u, info = cg(A, rhs, rtol=tol, atol=0.0, M=M, maxiter=10 * n)
    if info != 0:
        raise NonConvergenceError(f"conjugate gradients did not converge (info={info})")
    return u


@dataclass
class GammaDot:
    value: float
    numerator: float
    denominator: float


def gamma_dot(dt_n_plus: np.ndarray, dt_kinetic_plus: float, gamma: float, psi: np.ndarray,
              xgrid: SpatialGrid, full_output: bool = False):
    """Rate of the intermediary inverse temperature.

    Parameters
    ----------
    dt_n_plus : ndarray
        ``d_t n_+``, from the ion continuity equation.
    dt_kinetic_plus : float
        ``d_t int int |v|^2 F_+ / 2``.

    Raises
    ------
    ConsistencyError
        If the denominator falls below ``3/(2 gamma^2)``.
    """
    psi = np.asarray(psi, float)
    lap_psi = _laplacian(psi, xgrid)
    u1 = invert_pp_operator(dt_n_plus, gamma, psi, xgrid)
    u2 = invert_pp_operator(np.exp(gamma * psi) * psi, gamma, psi, xgrid)
    num = dt_kinetic_plus - float(xgrid.integrate(lap_psi * u1)) / FOUR_PI
    base = 1.5 / gamma ** 2
    den = base - float(xgrid.integrate(lap_psi * u2)) / FOUR_PI
    if den < base * (1 - 1e-8):
        raise ConsistencyError(f"gamma_dot denominator {den:.6e} below 3/(2 gamma^2) = {base:.6e}")
    out = GammaDot(num / den, num, den)
    return out if full_output else out.value


def pp_invariant(gamma: float, kinetic_plus: float, psi: np.ndarray, xgrid: SpatialGrid) -> float:
    """``3/(2 gamma) + K_+ + int |psi'|^2 / (8 pi)``."""
    return 1.5 / gamma + kinetic_plus + field_energy(xgrid.derivative(psi), xgrid)


def gamma_from_invariant(n_plus: np.ndarray, kinetic_plus: float, invariant: float,
                         xgrid: SpatialGrid, electron_mass: float, guess: float,
                         window: float = 8.0, psi0=None):
    """Inverse temperature that restores a prescribed invariant value.

    The invariant is strictly decreasing in ``gamma`` (its derivative is
    minus the ``gamma_dot`` denominator), so the root is bracketed and
    found by Brent's method.

    Returns
    -------
    gamma, psi
    """
    cache = {}

    def g(gam):
        psi = solve_poincare_poisson(n_plus, gam, electron_mass, xgrid, psi0=psi0)
        cache[gam] = psi
        return pp_invariant(gam, kinetic_plus, psi, xgrid) - invariant

    lo, hi = guess, guess
    glo = ghi = g(guess)
    if glo == 0:
        return guess, cache[guess]
    factor = 1.05
    while True:
        if glo < 0:
            hi, ghi = lo, glo
            lo = lo / factor
            glo = g(lo)
            if glo >= 0:
                break
        else:
            lo, glo = hi, ghi
            hi = hi * factor
            ghi = g(hi)
            if ghi <= 0:
                break
        factor *= factor
        if lo < np.exp(-window) or hi > np.exp(window):
            raise BlowUpError(f"inverse temperature left the window ({lo:.3e}, {hi:.3e})")
    root = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    psi = solve_poincare_poisson(n_plus, root, electron_mass, xgrid, psi0=psi0)
    return float(root), psi


# ---------------------------------------------------------------------------
# time integration


@dataclass
class IonData:
    """Ion quantities entering the intermediary system at one time."""

    n_plus: np.ndarray
    dt_n_plus: np.ndarray
    kinetic: float
    dt_kinetic: float


@dataclass
class PPTrajectory:
    times: np.ndarray
    gamma: np.ndarray
    psi: np.ndarray
    invariant: np.ndarray

    @property
    def invariant_drift_rate(self) -> float:
        span = self.times[-1] - self.times[0]
        return float(np.max(np.abs(self.invariant - self.invariant[0])) / span) if span > 0 else 0.0


def evolve_pp(ion: Callable[[float], IonData], beta_in: float, t_end: float, dt: float,
              xgrid: SpatialGrid, electron_mass: Optional[float] = None,
              window: float = 8.0) -> PPTrajectory:
    """Integrate ``gamma' = gamma_dot`` by classical RK4, re-solving ``psi`` at each stage.

    Parameters
    ----------
    ion : callable
        Returns :class:`IonData` at a given time.
    beta_in : float
        ``gamma(0)``.
    window : float
        Blow-up is flagged when ``|ln gamma|`` exceeds this value.
    """
    if not beta_in > 0:
        raise DomainError("beta_in must be positive")
    nsteps = max(1, int(round(t_end / dt)))
    h = t_end / nsteps
    d0 = ion(0.0)
    mass = float(xgrid.integrate(d0.n_plus)) if electron_mass is None else float(electron_mass)

    def rate(t, gam, guess):
        if not np.isfinite(gam) or abs(np.log(gam)) > window:
            raise BlowUpError(f"gamma = {gam} left the window at t = {t}")
        d = ion(t)
        psi = solve_poincare_poisson(d.n_plus, gam, mass, xgrid, psi0=guess)
        return gamma_dot(d.dt_n_plus, d.dt_kinetic, gam, psi, xgrid), psi

    t, gam = 0.0, float(beta_in)
    psi = solve_poincare_poisson(d0.n_plus, gam, mass, xgrid)
    times, gammas, psis, inv = [t], [gam], [psi], [pp_invariant(gam, d0.kinetic, psi, xgrid)]
    for _ in range(nsteps):
        k1, _p = rate(t, gam, psi)
        k2, _p = rate(t + h / 2, gam + h / 2 * k1, psi)
        k3, _p = rate(t + h / 2, gam + h / 2 * k2, psi)
        k4, _p = rate(t + h, gam + h * k3, psi)
        gam = gam + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        if abs(np.log(gam)) > window:
            raise BlowUpError(f"gamma = {gam} left the window at t = {t}")
        d = ion(t)
        psi = solve_poincare_poisson(d.n_plus, gam, mass, xgrid, psi0=psi)
        times.append(t)
        gammas.append(gam)
        psis.append(psi)
        inv.append(pp_invariant(gam, d.kinetic, psi, xgrid))
    return PPTrajectory(np.array(times), np.array(gammas), np.array(psis), np.array(inv))
