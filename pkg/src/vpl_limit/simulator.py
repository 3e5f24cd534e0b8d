"""Time integration of the coupled two-species system and of its limit.

Three modes are supported:

``coupled``
    Ions ``F_+`` and electrons ``F_-`` on ``T^1 x R^3`` with the scaled
    electron equation ``eps d_t F_- + xi d_x F_- - E d_xi F_- = Q(F_-, F_-) +
    Q_{+-}(F_+, F_-)`` and the ion equation ``d_t F_+ + v d_x F_+ + E d_v F_+ =
    Q(F_+, F_+) + Q_{-+}(F_-, F_+)``.  The intermediary pair ``(gamma, psi)``
    is carried along by enforcing its energy invariant after every step.
``limit``
    Ions only, with Maxwell-Boltzmann electrons ``mu_beta e^{beta phi0}``;
    ``beta`` follows from the conserved energy
    ``3/(2 beta) + K_+ + int |E0|^2 / (8 pi)``.
``homogeneous``
    A single spatial cell, collisions only.

Each step is a symmetric splitting ``X V C V X`` (free transport, field
acceleration, collisions).  Transport and acceleration are exact spectral
shifts.  The electron Vlasov substeps act on the deviation from the
Maxwell-Boltzmann state of the current field, which is invariant under the
exact flow; this keeps the splitting error proportional to the deviation
when the fast electron time ``dt / eps`` is long.  Collisions use a
frozen-coefficient Crank-Nicolson predictor-corrector whose final update is
written in divergence form, so mass is conserved exactly regardless of the
linear solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import landau_kernel as lk
from .collision import (FluxCoefficients, FluxOperator, add_coefficients,
                        cross_minus_plus_coefficients, cross_plus_minus_coefficients,
                        flux_operator, stack_coefficients)
from .errors import BlowUpError, DomainError, NonConvergenceError, NumericalError, OverflowGuardError
from .field_solver import (field_energy, gamma_from_invariant, mb_poisson_limit, pp_invariant,
                           solve_poisson)
from .hermite_macro import TrajectoryFrame
from .phase_grid import SpatialGrid, VelocityGrid, default_extent, maxwellian, moments

__all__ = [
    "SimConfig",
    "SimState",
    "RunDiagnostics",
    "RunResult",
    "Simulator",
    "DIAGNOSTIC_COLUMNS",
    "error_functionals",
    "ion_error",
    "run",
    "sweep_epsilon",
    "SweepResult",
    "shift_x",
    "shift_v",
    "collision_step",
    "loglog_slope",
    "envelope",
    "WEIGHT_CAP",
]

MODES = ("coupled", "limit", "homogeneous")
DIAGNOSTIC_COLUMNS = ("t", "mass_i", "mass_e", "mom_x", "energy", "field_energy",
                      "E1", "E2", "D1", "D2", "ion_err")
# Gaussian weights are saturated beyond the radius where they reach this value.
WEIGHT_CAP = 1.0e3


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.

    Ion data are ``(1 + amplitude cos(2 pi wavenumber x)) mu_{ion_beta}``;
    electron data are ``mu_beta_in e^{beta_in phi0}`` times
    ``1 + electron_perturbation sqrt(beta_in) xi_1 sin(2 pi x)``, with
    ``phi0`` the Maxwell-Boltzmann potential of the ion density.
    ``moments`` are the polynomial ion weights ``m_0, m_1, m_2``.
    """

    mode: str = "coupled"
    eps: float = 0.1
    beta_in: float = 1.0
    eta: float = 0.05
    s: int = 3
    moments: Tuple[int, int, int] = (5, 10, 15)
    n_x: int = 32
    n_v_ion: int = 24
    n_v_electron: int = 24
    extent_ion: Optional[float] = None
    extent_electron: Optional[float] = None
    dt: float = 0.02
    t_end: float = 0.5
    snapshot_every: int = 1
    ion_beta: float = 1.0
    amplitude: float = 0.1
    wavenumber: int = 1
    electron_perturbation: float = 0.0
    noise: float = 0.0
    seed: int = 0
    dtau_max: float = 0.2
    plasma_cfl: float = 1.0
    cross_mode: str = "fast"
    gmres_rtol: float = 1e-12
    collisions: bool = True

    def __post_init__(self):
        object.__setattr__(self, "moments", tuple(int(m) for m in self.moments))
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise DomainError(f"{key}: {msg}")

        if self.mode not in MODES:
            bad("mode", f"must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.eps <= 1:
            bad("eps", f"must lie in (0, 1], got {self.eps}")
        for key in ("beta_in", "ion_beta", "dt", "t_end", "dtau_max", "plasma_cfl", "gmres_rtol"):
            if not getattr(self, key) > 0:
                bad(key, f"must be positive, got {getattr(self, key)}")
        if not 0 < self.eta < 1:
            bad("eta", f"must lie in (0, 1), got {self.eta}")
        if self.s < 0:
            bad("s", "must be nonnegative")
        if len(self.moments) != 3 or any(m < 0 for m in self.moments):
            bad("moments", "needs three nonnegative integers")
        if self.n_x < 4:
            bad("n_x", "must be at least 4")
        for key in ("n_v_ion", "n_v_electron"):
            n = getattr(self, key)
            if n < 8 or n % 2:
                bad(key, f"must be even and >= 8, got {n}")
        for key in ("extent_ion", "extent_electron"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                bad(key, "must be positive")
        if self.snapshot_every < 1:
            bad("snapshot_every", "must be at least 1")
        if not 0 <= self.amplitude < 1:
            bad("amplitude", "must lie in [0, 1)")
        if self.wavenumber < 1:
            bad("wavenumber", "must be a positive integer")
        if self.noise < 0 or self.amplitude + self.noise >= 1:
            bad("noise", "must be nonnegative with amplitude + noise < 1")
        if self.cross_mode not in ("fast", "direct"):
            bad("cross_mode", "must be 'fast' or 'direct'")
        if self.electron_perturbation < 0:
            bad("electron_perturbation", "must be nonnegative")

    # derived -----------------------------------------------------------------
    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def xgrid(self) -> SpatialGrid:
        return SpatialGrid(self.n_x)

    def igrid(self) -> VelocityGrid:
        return VelocityGrid(self.n_v_ion, self.extent_ion or default_extent(self.ion_beta))

    def egrid(self) -> VelocityGrid:
        return VelocityGrid(self.n_v_electron, self.extent_electron or default_extent(self.beta_in))

    def quick(self) -> "SimConfig":
        """Coarse variant: 16 points per velocity axis and 16 cells."""
        return replace(self, n_x=16, n_v_ion=16, n_v_electron=16)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["moments"] = list(self.moments)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise DomainError(f"unknown keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass
class SimState:
    t: float
    F_plus: np.ndarray
    F_minus: Optional[np.ndarray]
    gamma: float
    psi: np.ndarray
    invariant: float
    step: int = 0


@dataclass
class RunDiagnostics:
    """Rows of :data:`DIAGNOSTIC_COLUMNS`, one per recorded time."""

    rows: List[Dict[str, float]] = field(default_factory=list)

    def append(self, row: Dict[str, float]):
        self.rows.append({k: float(row.get(k, math.nan)) for k in DIAGNOSTIC_COLUMNS})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)


@dataclass
class RunResult:
    config: SimConfig
    diagnostics: RunDiagnostics
    state: SimState
    frames: List[TrajectoryFrame]
    summary: dict


# ---------------------------------------------------------------------------
# spectral shifts


def shift_x(F: np.ndarray, velocity: np.ndarray, tau: float) -> np.ndarray:
    """``F(x - velocity tau)`` on the unit torus, ``velocity`` along the first velocity axis."""
    n = F.shape[0]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    phase = np.exp(-1j * k[:, None] * (velocity * tau)[None, :])
    Fh = np.fft.rfft(F, axis=0) * phase[:, :, None, None]
    return np.fft.irfft(Fh, n=n, axis=0)


def shift_v(F: np.ndarray, shift: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """``F(x, v_1 - shift(x))`` with the velocity box treated as periodic."""
    n = grid.n
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.h)
    phase = np.exp(-1j * np.asarray(shift)[:, None] * k[None, :])
    Fh = np.fft.rfft(F, axis=1) * phase[:, :, None, None]
    return np.fft.irfft(Fh, n=n, axis=1)


def _normalized_maxwellian(q: float, grid: VelocityGrid) -> np.ndarray:
    mu = maxwellian(q, grid)
    return mu / (mu.sum() * grid.cell_volume)


def _density(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return np.sum(F, axis=(1, 2, 3)) * grid.cell_volume


# ---------------------------------------------------------------------------
# collisions


def _cn_once(F: np.ndarray, op: FluxOperator, coeffs: FluxCoefficients, dt: float,
             rtol: float) -> np.ndarray:
    """One frozen-coefficient Crank-Nicolson step, finished in divergence form."""
    shape = F.shape

    def L(G):
        return op.apply(coeffs, G)

    LF = L(F)
    rhs = (F + 0.5 * dt * LF).ravel()
    A = LinearOperator((F.size, F.size), dtype=float,
                       matvec=lambda g: g - 0.5 * dt * L(g.reshape(shape)).ravel())
    history: List[float] = []
    x, info = gmres(A, rhs, x0=F.ravel(), rtol=rtol, atol=0.0, restart=40, maxiter=50,
                    callback=history.append, callback_type="pr_norm")
    if info != 0:
        raise NonConvergenceError(f"collision solve did not converge (info={info})", history)
    G = x.reshape(shape)
    return F + 0.5 * dt * (LF + L(G))


def collision_step(F: np.ndarray, op: FluxOperator, dt: float, substeps: int,
                   frozen: Optional[FluxCoefficients] = None, rtol: float = 1e-12,
                   self_collisions: bool = True) -> np.ndarray:
    """Advance ``d_t F = Q(F, F) + div(frozen flux)`` by ``substeps`` predictor-corrector steps.

    ``F`` has a leading cell axis.  The self-collision coefficients are
    rebuilt at the start and at the predicted midpoint of every substep.
    """
    h = dt / substeps

    def build(G):
        if not self_collisions:
            return frozen
        c = op.self_coefficients(G)
        return c if frozen is None else add_coefficients(c, frozen)

    for _ in range(substeps):
        pred = _cn_once(F, op, build(F), h, rtol)
        F = _cn_once(F, op, build(0.5 * (F + pred)), h, rtol)
    return F


# ---------------------------------------------------------------------------
# error functionals


def _saturated_gaussian(q: float, grid: VelocityGrid) -> np.ndarray:
    """``e^{q|xi|^2/4}`` saturated smoothly at :data:`WEIGHT_CAP`."""
    r2 = grid.speed_squared
    r2_cap = 4.0 * math.log(WEIGHT_CAP) / q
    return np.exp(0.25 * q * r2) / (1.0 + np.exp(0.25 * q * (r2 - r2_cap)))


def _bessel_x(g: np.ndarray, s: int) -> np.ndarray:
    n = g.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    mult = (1.0 + k * k) ** (0.5 * s)
    return np.real(np.fft.ifft(mult[:, None, None, None] * np.fft.fft(g, axis=0), axis=0))


def error_functionals(F_minus: np.ndarray, q_ref: float, potential: np.ndarray, eps: float,
                      egrid: VelocityGrid, xgrid: SpatialGrid, beta_in: float,
                      eta: float = 0.05, s: int = 3) -> Dict[str, float]:
    """Electron energy and dissipation functionals relative to ``mu_q e^{q potential}``.

    For ``alpha = 1, 2`` with ``q_alpha = e^{alpha eta} beta_in``::

        E_alpha = |w_alpha <d_x>^s g|^2 + |w_{alpha+1} g|^2
        D_alpha = same with the velocity norm of H_sigma plus H^-_{sigma; eps}

    where ``w_a = e^{q_a |xi|^2/4}`` and ``g = F_minus - mu_q e^{q potential}``.
    The Gaussian weights saturate at :data:`WEIGHT_CAP` so that rounding in
    the far tail is not amplified.

    Raises
    ------
    OverflowGuardError
        If a weight grows at least as fast as the reference Maxwellian
        decays, so the weighted reference is not integrable.
    """
    ref = maxwellian(q_ref, egrid)[None] * np.exp(q_ref * np.asarray(potential))[:, None, None, None]
    g = np.asarray(F_minus, float) - ref
    gs = _bessel_x(g, s)
    dv = egrid.cell_volume
    spec_minus = lk.NormSpec("H_minus_eps", eps)
    spec_sigma = lk.NormSpec("H_sigma")
    out = {}
    for alpha in (1, 2):
        q_a = math.exp(alpha * eta) * beta_in
        q_b = math.exp((alpha + 1) * eta) * beta_in
        if q_b >= 2.0 * q_ref:
            raise OverflowGuardError(
                f"weight parameter {q_b:.4g} is not resolvable against reference {q_ref:.4g}")
        wa = _saturated_gaussian(q_a, egrid)
        wb = _saturated_gaussian(q_b, egrid)
        ha, hb = wa * gs, wb * g
        energy = (np.sum(ha * ha) + np.sum(hb * hb)) * dv * xgrid.dx
        diss = 0.0
        for h in (ha, hb):
            diss += lk.norm_squared(h, spec_sigma, egrid, xgrid)
            diss += lk.norm_squared(h, spec_minus, egrid, xgrid)
        out[f"E{alpha}"] = float(energy)
        out[f"D{alpha}"] = float(diss)
    return out


def ion_error(F_eps: np.ndarray, F_limit: np.ndarray, igrid: VelocityGrid, xgrid: SpatialGrid,
              moments_: Sequence[int] = (5, 10, 15), s: int = 3) -> float:
    """``|<v>^{m_1} u| + |<v>^{m_0} <d_x>^s u|`` norm of ``u = F_eps - F_limit``."""
    u = np.asarray(F_eps, float) - np.asarray(F_limit, float)
    jap = 1.0 + igrid.speed_squared
    w0 = jap ** (0.5 * moments_[0])
    w1 = jap ** (0.5 * moments_[1])
    dv = igrid.cell_volume * xgrid.dx
    val = np.sum((w1 * u) ** 2) * dv + np.sum((w0 * _bessel_x(u, s)) ** 2) * dv
    return float(math.sqrt(val))


# ---------------------------------------------------------------------------
# the stepper


class Simulator:
    """Stepper for one :class:`SimConfig`."""

    def __init__(self, config: SimConfig):
        self.cfg = config
        self.xgrid = config.xgrid()
        self.igrid = config.igrid()
        self.egrid = config.egrid()
        self.op_i = flux_operator(self.igrid, float(config.ion_beta))
        self.mu_i = _normalized_maxwellian(config.ion_beta, self.igrid)
        self.v1_i = self.igrid.nodes
        self.v1_e = self.egrid.nodes
        if config.mode == "homogeneous":
            self.n_cells = 1
        else:
            self.n_cells = self.xgrid.n_cells

    # initial data --------------------------------------------------------------
    def ion_density(self) -> np.ndarray:
        cfg = self.cfg
        if cfg.mode == "homogeneous":
            return np.ones(1)
        x = self.xgrid.nodes
        n = 1.0 + cfg.amplitude * np.cos(2 * np.pi * cfg.wavenumber * x)
        if cfg.noise > 0:
            rng = np.random.default_rng(cfg.seed)
            modes = np.arange(1, 4)
            amp = rng.uniform(-1, 1, size=(2, modes.size)) * cfg.noise / (2 * modes.size)
            for j, m in enumerate(modes):
                n += amp[0, j] * np.cos(2 * np.pi * m * x) + amp[1, j] * np.sin(2 * np.pi * m * x)
        return n

    def initial_state(self) -> SimState:
        cfg = self.cfg
        n_plus = self.ion_density()
        F_plus = n_plus[:, None, None, None] * self.mu_i[None]
        K = self._kinetic(F_plus, self.igrid)
        beta = cfg.beta_in
        if cfg.mode == "homogeneous":
            phi0 = np.zeros(1)
            invariant = 1.5 / beta + K
        else:
            phi0 = mb_poisson_limit(n_plus, beta, self.xgrid)
            invariant = pp_invariant(beta, K, phi0, self.xgrid)
        F_minus = None
        if cfg.mode != "limit":
            mu_e = _normalized_maxwellian(beta, self.egrid)
            dens = np.exp(beta * phi0)
            if cfg.mode != "homogeneous":
                dens *= self.xgrid.integrate(n_plus) / self.xgrid.integrate(dens)
            F_minus = dens[:, None, None, None] * mu_e[None]
            if cfg.electron_perturbation > 0:
                delta = cfg.electron_perturbation
                xi1 = self.egrid.mesh[0][None]
                if cfg.mode == "homogeneous":
                    # anisotropic temperature, same mass
                    q = beta * (1.0 + delta)
                    aniso = np.sqrt(q / beta) * np.exp(-0.5 * (q - beta) * self.egrid.mesh[0] ** 2)
                    G = mu_e * aniso
                    F_minus = (G / (G.sum() * self.egrid.cell_volume))[None]
                else:
                    bump = delta * np.sqrt(beta) * xi1 * np.sin(2 * np.pi * self.xgrid.nodes)[:, None, None, None]
                    F_minus = F_minus * (1.0 + np.tanh(bump))
        return SimState(0.0, F_plus, F_minus, beta, phi0, invariant)

    # helpers --------------------------------------------------------------------
    def _kinetic(self, F, grid) -> float:
        _, _, kin = moments(F, grid)
        if self.cfg.mode == "homogeneous":
            return float(np.sum(kin))
        return float(self.xgrid.integrate(kin))

    def _electron_reference(self, gamma: float, phi: np.ndarray, mass: float) -> np.ndarray:
        prof = np.exp(gamma * (phi - phi.max()))
        prof *= mass / self.xgrid.integrate(prof)
        return prof[:, None, None, None] * _normalized_maxwellian(gamma, self.egrid)[None]

    def _check(self, F, name):
        if not np.all(np.isfinite(F)):
            raise BlowUpError(f"{name} became non-finite")

    def _electron_substeps(self, span: float) -> int:
        return max(1, math.ceil(span / (self.cfg.eps * self.cfg.dtau_max) - 1e-12))

    def _collide(self, state: SimState, Fi: np.ndarray, Fe: Optional[np.ndarray], dt: float):
        cfg = self.cfg
        if not cfg.collisions:
            return Fi, Fe
        gamma = state.gamma
        if Fe is None:
            return collision_step(Fi, self.op_i, dt, 1, rtol=cfg.gmres_rtol), None
        op_e = flux_operator(self.egrid, float(gamma))
        m = self._electron_substeps(0.5 * dt)

        def electrons(Fe, Fi):
            cross = stack_coefficients(cross_plus_minus_coefficients(
                Fi, cfg.eps, self.egrid, self.igrid, q_e=gamma, q_i=cfg.ion_beta,
                mode=cfg.cross_mode))
            return collision_step(Fe, op_e, 0.5 * dt / cfg.eps, m, frozen=cross, rtol=cfg.gmres_rtol)

        Fe = electrons(Fe, Fi)
        cross_i = stack_coefficients(cross_minus_plus_coefficients(
            Fe, cfg.eps, self.egrid, self.igrid, q_e=gamma, q_i=cfg.ion_beta, mode=cfg.cross_mode))
        Fi = collision_step(Fi, self.op_i, dt, 1, frozen=cross_i, rtol=cfg.gmres_rtol)
        Fe = electrons(Fe, Fi)
        return Fi, Fe

    # steps ----------------------------------------------------------------------
    def step(self, state: SimState) -> SimState:
        mode = self.cfg.mode
        if mode == "coupled":
            new = self._step_coupled(state)
        elif mode == "limit":
            new = self._step_limit(state)
        else:
            new = self._step_homogeneous(state)
        self._check(new.F_plus, "ion distribution")
        if new.F_minus is not None:
            self._check(new.F_minus, "electron distribution")
        return new

    def _step_homogeneous(self, state: SimState) -> SimState:
        Fi, Fe = self._collide(state, state.F_plus, state.F_minus, self.cfg.dt)
        return replace(state, t=state.t + self.cfg.dt, F_plus=Fi, F_minus=Fe, step=state.step + 1)

    def _step_limit(self, state: SimState) -> SimState:
        cfg, xg = self.cfg, self.xgrid
        dt = cfg.dt
        Fi = shift_x(state.F_plus, self.v1_i, 0.5 * dt)
        n_i = _density(Fi, self.igrid)
        mass = float(xg.integrate(n_i))
        beta, phi0 = gamma_from_invariant(n_i, self._kinetic(Fi, self.igrid), state.invariant, xg,
                                          mass, state.gamma, psi0=state.psi)
        E = -xg.derivative(phi0)
        Fi = shift_v(Fi, 0.5 * dt * E, self.igrid)
        if cfg.collisions:
            Fi = collision_step(Fi, self.op_i, dt, 1, rtol=cfg.gmres_rtol)
        Fi = shift_v(Fi, 0.5 * dt * E, self.igrid)
        Fi = shift_x(Fi, self.v1_i, 0.5 * dt)
        n_i = _density(Fi, self.igrid)
        beta, phi0 = gamma_from_invariant(n_i, self._kinetic(Fi, self.igrid), state.invariant, xg,
                                          mass, beta, psi0=phi0)
        return SimState(state.t + dt, Fi, None, beta, phi0, state.invariant, state.step + 1)

    def _electron_cycles(self, n_i: np.ndarray) -> int:
        """Electron substeps per ion step.

        Each substep spans at most ``dtau_max`` electron time units, and the
        explicit field update (a leapfrog for plasma oscillations of
        frequency ``sqrt(4 pi n)/eps``) keeps ``omega dt_sub <= plasma_cfl``.
        """
        cfg = self.cfg
        span = cfg.dt / cfg.eps
        omega = math.sqrt(4.0 * math.pi * float(np.max(n_i)))
        return max(1, math.ceil(span / cfg.dtau_max - 1e-12),
                   math.ceil(omega * span / cfg.plasma_cfl - 1e-12))

    def _electron_substep(self, Fe, n_i, gamma, mass_e, dt_sub, op_e, cross):
        """``X V C V X`` for the electrons over ``dt_sub`` with the ions frozen.

        Transport acts on the deviation from the Maxwell-Boltzmann state of
        the predicted midpoint field, which the exact flow leaves invariant.
        """
        cfg, xg, eg = self.cfg, self.xgrid, self.egrid
        tau = 0.5 * dt_sub / cfg.eps
        phi_n, _ = solve_poisson(n_i, _density(Fe, eg), xg)
        M_n = self._electron_reference(gamma, phi_n, mass_e)
        n_pred = _density(M_n + shift_x(Fe - M_n, self.v1_e, tau), eg)
        n_pred *= xg.integrate(n_i) / xg.integrate(n_pred)
        phi, E = solve_poisson(n_i, n_pred, xg)
        M = self._electron_reference(gamma, phi, mass_e)
        self._check_shift(E, dt_sub)
        Fe = M + shift_v(shift_x(Fe - M, self.v1_e, tau), -tau * E, eg)
        if cfg.collisions:
            m = max(1, math.ceil(2.0 * tau / cfg.dtau_max - 1e-12))
            Fe = collision_step(Fe, op_e, 2.0 * tau, m, frozen=cross, rtol=cfg.gmres_rtol)
        return M + shift_x(shift_v(Fe - M, -tau * E, eg), self.v1_e, tau)

    def _step_coupled(self, state: SimState) -> SimState:
        cfg, xg, eg = self.cfg, self.xgrid, self.egrid
        dt, gamma = cfg.dt, state.gamma
        Fe0 = state.F_minus
        mass_e = float(xg.integrate(_density(Fe0, eg)))

        Fi = shift_x(state.F_plus, self.v1_i, 0.5 * dt)
        n_i = _density(Fi, self.igrid)
        op_e = cross = None
        if cfg.collisions:
            op_e = flux_operator(eg, float(gamma))
            cross = stack_coefficients(cross_plus_minus_coefficients(
                Fi, cfg.eps, eg, self.igrid, q_e=gamma, q_i=cfg.ion_beta, mode=cfg.cross_mode))

        k = self._electron_cycles(n_i)
        dt_sub = dt / k
        Fe = Fe0
        densities = [_density(Fe, eg)]
        for _ in range(k):
            Fe = self._electron_substep(Fe, n_i, gamma, mass_e, dt_sub, op_e, cross)
            densities.append(_density(Fe, eg))
        # electron density at the half step, interpolated between substeps
        j, frac = divmod(0.5 * k, 1.0)
        j = int(j)
        n_e_mid = densities[j] if frac == 0 else 0.5 * (densities[j] + densities[j + 1])
        n_e_mid = n_e_mid * xg.integrate(n_i) / xg.integrate(n_e_mid)
        _, E = solve_poisson(n_i, n_e_mid, xg)

        Fi = shift_v(Fi, 0.5 * dt * E, self.igrid)
        if cfg.collisions:
            # cross coefficients are linear in F_minus: this is the time average
            cross_i = stack_coefficients(cross_minus_plus_coefficients(
                0.5 * (Fe0 + Fe), cfg.eps, eg, self.igrid, q_e=gamma, q_i=cfg.ion_beta,
                mode=cfg.cross_mode))
            Fi = collision_step(Fi, self.op_i, dt, 1, frozen=cross_i, rtol=cfg.gmres_rtol)
        Fi = shift_x(shift_v(Fi, 0.5 * dt * E, self.igrid), self.v1_i, 0.5 * dt)

        n_i = _density(Fi, self.igrid)
        gamma, psi = gamma_from_invariant(n_i, self._kinetic(Fi, self.igrid), state.invariant, xg,
                                          float(xg.integrate(n_i)), gamma, psi0=state.psi)
        return SimState(state.t + dt, Fi, Fe, gamma, psi, state.invariant, state.step + 1)

    def _check_shift(self, E, dt):
        # acceleration shifts larger than a quarter box wrap visible mass
        shift = float(np.max(np.abs(E))) * 0.5 * dt / self.cfg.eps
        if shift > 0.25 * self.egrid.extent:
            raise NumericalError(
                f"electron acceleration shift {shift:.3g} exceeds a quarter of the velocity box; "
                f"reduce dt below {dt * 0.25 * self.egrid.extent / shift:.3g}")

    # diagnostics ----------------------------------------------------------------
    def field(self, state: SimState) -> Tuple[np.ndarray, np.ndarray]:
        """Potential and field of ``state`` (zeros in homogeneous mode)."""
        if self.cfg.mode == "homogeneous":
            return np.zeros(1), np.zeros(1)
        if self.cfg.mode == "limit":
            return state.psi, -self.xgrid.derivative(state.psi)
        return solve_poisson(_density(state.F_plus, self.igrid), _density(state.F_minus, self.egrid),
                             self.xgrid)

    def diagnostics(self, state: SimState, with_functionals: bool = True) -> Dict[str, float]:
        cfg = self.cfg
        homog = cfg.mode == "homogeneous"

        def xint(a):
            return float(np.sum(a)) if homog else float(self.xgrid.integrate(a))

        n_i, p_i, k_i = moments(state.F_plus, self.igrid)
        row = {"t": state.t, "mass_i": xint(n_i), "mom_x": xint(p_i[..., 0])}
        kinetic = xint(k_i)
        _, E = self.field(state)
        fe = 0.0 if homog else field_energy(E, self.xgrid)
        row["field_energy"] = fe
        if state.F_minus is not None:
            n_e, p_e, k_e = moments(state.F_minus, self.egrid)
            row["mass_e"] = xint(n_e)
            row["mom_x"] += cfg.eps * xint(p_e[..., 0])
            row["energy"] = kinetic + xint(k_e) + fe
        else:
            row["mass_e"] = math.nan
            row["energy"] = 1.5 / state.gamma + kinetic + fe
        if with_functionals and cfg.mode == "coupled":
            row.update(error_functionals(state.F_minus, state.gamma, state.psi, cfg.eps, self.egrid,
                                         self.xgrid, cfg.beta_in, cfg.eta, cfg.s))
        return row

    def frame(self, state: SimState) -> TrajectoryFrame:
        _, E = self.field(state)
        return TrajectoryFrame(state.t, state.F_minus, E, state.gamma, state.psi, state.F_plus)


def run(config: SimConfig, keep_frames: bool = False, with_functionals: bool = True,
        reference: Optional[Sequence[np.ndarray]] = None,
        callback: Optional[Callable[[SimState], None]] = None) -> RunResult:
    """Integrate ``config`` to ``t_end`` and record diagnostics every ``snapshot_every`` steps.

    ``reference`` optionally supplies limit ion distributions at the recorded
    times; the ``ion_err`` column is filled from it.
    """
    sim = Simulator(config)
    state = sim.initial_state()
    diags = RunDiagnostics()
    frames: List[TrajectoryFrame] = []
    k = 0

    def record(st):
        nonlocal k
        row = sim.diagnostics(st, with_functionals)
        if reference is not None and k < len(reference):
            row["ion_err"] = ion_error(st.F_plus, reference[k], sim.igrid, sim.xgrid,
                                       config.moments, config.s)
        diags.append(row)
        if keep_frames:
            frames.append(sim.frame(st))
        k += 1

    record(state)
    for i in range(config.n_steps):
        state = sim.step(state)
        if callback is not None:
            callback(state)
        if (i + 1) % config.snapshot_every == 0 or i + 1 == config.n_steps:
            record(state)
    summary = _summary(config, diags, state)
    return RunResult(config, diags, state, frames, summary)


def _drift(values: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(values - values[0]))) / scale if values.size else 0.0


def _summary(config: SimConfig, diags: RunDiagnostics, state: SimState) -> dict:
    t = diags.column("t")
    span = max(float(t[-1] - t[0]), 1e-300) if len(t) > 1 else 1.0
    mass = diags.column("mass_i")
    energy = diags.column("energy")
    out = {
        "mode": config.mode,
        "eps": config.eps,
        "t_end": float(state.t),
        "steps": int(state.step),
        "final_gamma": float(state.gamma),
        "mass_drift": _drift(mass, abs(mass[0])),
        "energy_drift_rate": _drift(energy, abs(energy[0])) / span,
        "momentum_drift_rate": _drift(diags.column("mom_x"), 1.0) / span,
    }
    if config.mode != "limit":
        out["electron_mass_drift"] = _drift(diags.column("mass_e"), abs(diags.column("mass_e")[0]))
    return out


# ---------------------------------------------------------------------------
# epsilon sweep


@dataclass
class SweepResult:
    eps: List[float]
    ion_error: List[float]
    dissipation: List[float]
    envelope_constant: float
    envelope_ratios: List[float]
    slopes: Dict[str, float]
    runs: Dict[float, RunDiagnostics]

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "ion_error": self.ion_error,
            "dissipation": self.dissipation,
            "envelope_constant": self.envelope_constant,
            "envelope_ratios": self.envelope_ratios,
            "slopes": self.slopes,
        }


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def envelope(t: np.ndarray, eps: float, e_in: float, c: float = 1.0) -> np.ndarray:
    """``e^{-c (t/eps)^{2/3}} E_in + eps^{5/3} t^{1/3} + eps^2``."""
    t = np.asarray(t, float)
    return np.exp(-c * (t / eps) ** (2.0 / 3.0)) * e_in + eps ** (5.0 / 3.0) * t ** (1.0 / 3.0) + eps ** 2


def sweep_epsilon(config: SimConfig, eps_values: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                  progress: Optional[Callable[[str], None]] = None) -> SweepResult:
    """Coupled runs at several ``eps`` compared against one limit run.

    For each ``eps`` the ion error ``sup_t |F_+^eps - F_+^0|`` in the
    polynomially weighted norm, the combination
    ``eps sup_t E_2 + int D_2 dt`` of electron functionals relative to
    ``mu_beta e^{beta phi0}``, and the ratio of ``E_1`` to the decay envelope
    are recorded.
    """
    eps_values = [float(e) for e in eps_values]
    limit_cfg = replace(config, mode="limit")
    lim_sim = Simulator(limit_cfg)
    lstate = lim_sim.initial_state()
    limit_states = [lstate]
    for _ in range(limit_cfg.n_steps):
        lstate = lim_sim.step(lstate)
        limit_states.append(lstate)
    if progress:
        progress("limit run done")

    ion_err, diss, ratios, runs = [], [], [], {}
    for eps in eps_values:
        cfg = replace(config, mode="coupled", eps=eps, snapshot_every=1)
        sim = Simulator(cfg)
        state = sim.initial_state()
        diags = RunDiagnostics()
        times, E1, E2, D2, errs = [], [], [], [], []
        for i in range(cfg.n_steps + 1):
            if i:
                state = sim.step(state)
            ref = limit_states[i]
            funcs = error_functionals(state.F_minus, ref.gamma, ref.psi, eps, sim.egrid, sim.xgrid,
                                      cfg.beta_in, cfg.eta, cfg.s)
            err = ion_error(state.F_plus, ref.F_plus, sim.igrid, sim.xgrid, cfg.moments, cfg.s)
            row = sim.diagnostics(state, with_functionals=False)
            row.update(funcs)
            row["ion_err"] = err
            diags.append(row)
            times.append(state.t)
            E1.append(funcs["E1"])
            E2.append(funcs["E2"])
            D2.append(funcs["D2"])
            errs.append(err)
        times = np.array(times)
        D2 = np.array(D2)
        integral = float(np.sum(0.5 * (D2[1:] + D2[:-1]) * np.diff(times)))
        ion_err.append(max(errs))
        diss.append(eps * max(E2) + integral)
        env = envelope(times, eps, E1[0])
        ratios.append(float(np.max(np.array(E1) / env)))
        runs[eps] = diags
        if progress:
            progress(f"eps={eps:g}: ion error {ion_err[-1]:.3e}, dissipation {diss[-1]:.3e}")
    slopes = {"ion_error": loglog_slope(eps_values, ion_err),
              "dissipation": loglog_slope(eps_values, diss)}
    return SweepResult(eps_values, ion_err, diss, float(max(ratios)), ratios, slopes, runs)
