"""Landau collision operators in conservative flux form.

For ``Q(G1, G2) = div J`` the flux at a cell face ``f`` normal to axis ``d``
is

    J_d(f) = sum_j A_dj(f) (D_j G2)(f) - B_d(f) G2(f),

with ``A = Phi * G1`` and ``B = Phi * (D G1)`` tabulated at face offsets.
Gradients are taken in the weighted form ``D G = mu_ref grad(G / mu_ref)``
with a reference Maxwellian ``mu_ref``; since ``Phi(z) z = 0`` holds exactly
at face offsets, ``Q(mu_ref, mu_ref)`` and the linearized operator's null
space are annihilated to rounding.  The divergence is a conservative
difference with zero flux through the truncation boundary, so every output
has zero discrete mass.

The antisymmetric double-sum form, which conserves momentum and energy
exactly, is provided as an oracle for small grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .landau_kernel import SYM, _FULL, convolution_plan, unpack
from .multipole import Multipole
from .phase_grid import DomainError, VelocityGrid, maxwellian
from .stencils import apply_along, central_derivative2, face_derivative, face_value, node_derivative

__all__ = [
    "CollisionConfig",
    "FluxCoefficients",
    "FluxOperator",
    "flux_operator",
    "q_landau",
    "q_landau_oracle",
    "q_cross_minus_plus",
    "cross_minus_plus_coefficients",
    "cross_plus_minus_coefficients",
    "stack_coefficients",
    "add_coefficients",
    "q_cross_plus_minus",
    "q_cross_plus_minus_limit",
    "ConvolutionEvaluator",
    "linearized_L",
    "linearized_L_tilde",
    "linearized_M",
    "gamma_bilinear",
    "entropy_dissipation",
    "EntropyReport",
]


@dataclass(frozen=True)
class CollisionConfig:
    """Mass-ratio parameter and which part of the operator to keep."""

    eps: float = 1.0
    split: str = "full"

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise DomainError(f"eps must lie in (0, 1], got {self.eps}")
        if self.split not in ("full", "diffusion_only", "transport_only"):
            raise DomainError(f"unknown split {self.split!r}")


@dataclass
class FluxCoefficients:
    """Frozen face coefficients of a linear flux ``J_d = C_dj grad_j p - c_d p``.

    ``p = G2 / mu_ref``; ``C[d]`` has a leading axis of length 3.
    """

    C: List[np.ndarray]
    c: List[np.ndarray]


class FluxOperator:
    """Stencils and reference weights for one velocity grid.

    Parameters
    ----------
    grid : VelocityGrid
    q_ref : float
        Inverse temperature of the reference Maxwellian used in the weighted
        gradient.
    """

    def __init__(self, grid: VelocityGrid, q_ref: float = 1.0):
        if not q_ref > 0:
            raise DomainError("q_ref must be positive")
        self.grid = grid
        self.q_ref = float(q_ref)
        n, h = grid.n, grid.h
        self.ND = node_derivative(n, h)
        self.FV = face_value(n)
        self.FD = face_derivative(n, h)
        self.mu = maxwellian(q_ref, grid)
        self.face_coords = []
        self.mu_face = []
        for d in range(3):
            coords = []
            for j in range(3):
                arr = grid.faces if j == d else grid.nodes
                shape = [1, 1, 1]
                shape[j] = arr.size
                coords.append(arr.reshape(shape))
            self.face_coords.append(coords)
            r2 = coords[0] ** 2 + coords[1] ** 2 + coords[2] ** 2
            self.mu_face.append((q_ref / (2 * np.pi)) ** 1.5 * np.exp(-0.5 * q_ref * r2))

    # weighted gradients -------------------------------------------------
    def ratio(self, G: np.ndarray) -> np.ndarray:
        return G / self.mu

    def weighted_gradient(self, G: np.ndarray) -> np.ndarray:
        """``grad G`` evaluated as ``mu_ref grad(G/mu_ref) - q_ref v G``, stacked on a leading axis."""
        p = self.ratio(G)
        v = self.grid.mesh
        return np.stack([self.mu * (apply_along(self.ND, p, G.ndim - 3 + j) - self.q_ref * v[j] * p)
                         for j in range(3)], axis=0)

    def relative_gradient(self, G: np.ndarray) -> np.ndarray:
        """``mu_ref grad(G/mu_ref) = grad G + q_ref v G``; vanishes on ``mu_ref``."""
        p = self.ratio(G)
        return np.stack([self.mu * apply_along(self.ND, p, G.ndim - 3 + j) for j in range(3)], axis=0)

    def face_points(self, d: int) -> np.ndarray:
        """Coordinates of the faces normal to axis ``d``, shape ``face_shape + (3,)``."""
        c = self.face_coords[d]
        shape = np.broadcast_shapes(c[0].shape, c[1].shape, c[2].shape)
        return np.stack([np.broadcast_to(c[j], shape) for j in range(3)], axis=-1)

    # coefficients ---------------------------------------------------------
    def coefficients(self, A: Sequence[np.ndarray], B: Sequence[np.ndarray],
                     split: str = "full") -> FluxCoefficients:
        """Fold ``mu_ref`` weights into face tables ``A[d]`` (3 rows) and ``B[d]``."""
        C, c = [], []
        for d in range(3):
            mf = self.mu_face[d]
            Ad = A[d]
            if split == "transport_only":
                C.append(np.zeros_like(Ad))
                c.append(mf * B[d])
                continue
            Cd = Ad * mf
            cd = self.q_ref * mf * sum(Ad[j] * self.face_coords[d][j] for j in range(3))
            if split == "full":
                cd = cd + mf * B[d]
            C.append(Cd)
            c.append(cd)
        return FluxCoefficients(C, c)

    def self_coefficients(self, G1: np.ndarray, split: str = "full") -> FluxCoefficients:
        """Coefficients of ``Q(G1, .)`` from FFT convolutions on this grid."""
        plan = convolution_plan(self.grid)
        A, B = plan.conv_faces(G1, self.weighted_gradient(G1))
        return self.coefficients(A, B, split)

    # application ------------------------------------------------------------
    def fluxes(self, coeffs: FluxCoefficients, G2: np.ndarray) -> List[np.ndarray]:
        p = self.ratio(G2)
        nd = p.ndim
        grads = [apply_along(self.ND, p, nd - 3 + j) for j in range(3)]
        out = []
        for d in range(3):
            ax = nd - 3 + d
            J = -coeffs.c[d] * apply_along(self.FV, p, ax)
            for j in range(3):
                g = apply_along(self.FD, p, ax) if j == d else apply_along(self.FV, grads[j], ax)
                J = J + coeffs.C[d][j] * g
            out.append(J)
        return out

    def divergence(self, J: Sequence[np.ndarray]) -> np.ndarray:
        h = self.grid.h
        out = None
        for d, Jd in enumerate(J):
            ax = Jd.ndim - 3 + d
            pad = [(0, 0)] * Jd.ndim
            pad[ax] = (1, 1)
            term = np.diff(np.pad(Jd, pad), axis=ax) / h
            out = term if out is None else out + term
        return out

    def apply(self, coeffs: FluxCoefficients, G2: np.ndarray) -> np.ndarray:
        return self.divergence(self.fluxes(coeffs, G2))


@lru_cache(maxsize=32)
def flux_operator(grid: VelocityGrid, q_ref: float = 1.0) -> FluxOperator:
    return FluxOperator(grid, q_ref)


def _check_shape(G, grid):
    if np.shape(G)[-3:] != grid.shape:
        raise DomainError(f"field shape {np.shape(G)} does not match grid {grid.shape}")


def q_landau(G1: np.ndarray, G2: np.ndarray, grid: VelocityGrid, q_ref: float = 1.0,
             split: str = "full") -> np.ndarray:
    """Bilinear Landau operator ``Q(G1, G2)`` in flux form.

    Leading axes of ``G1`` and ``G2`` (for example spatial cells) are batched.
    """
    _check_shape(G1, grid)
    _check_shape(G2, grid)
    op = flux_operator(grid, float(q_ref))
    return op.apply(op.self_coefficients(np.asarray(G1, float), split), np.asarray(G2, float))


def q_landau_oracle(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Antisymmetric double-sum form of ``Q(F, F)``.

    With ``D`` the second-order difference matrix (exact on quadratics) the
    operator is ``-D^T W`` where ``W_i = h^3 sum_j Phi(v_i - v_j)(F_j DF_i - F_i DF_j)``,
    so that mass, momentum and energy are conserved to rounding.  The cost
    is quadratic in the number of nodes.  Near equilibrium the two terms of
    ``W`` nearly cancel, so this form is an oracle for the conservation laws
    rather than for pointwise accuracy.
    """
    _check_shape(F, grid)
    D = central_derivative2(grid.n, grid.h)
    DF = np.stack([apply_along(D, F, d) for d in range(3)], axis=-1).reshape(-1, 3)
    W = kernels.landau_double_sum(grid.points, F.ravel(), DF) * grid.cell_volume
    W = W.reshape(grid.shape + (3,))
    return -sum(apply_along(D.T, W[..., d], d) for d in range(3))


# ---------------------------------------------------------------------------
# convolution fields evaluated off the grid


class ConvolutionEvaluator:
    """``A = Phi * G`` and ``B = Phi * grad G`` at arbitrary points.

    Inside the source box the FFT node tables are interpolated with cubic
    splines; outside, a multipole expansion of order ``order`` is used.
    Because ``Phi(y - v) v = Phi(y - v) y``, the drift is assembled as
    ``B(y) = (Phi * R)(y) - q_ref A(y) y`` with ``R = grad G + q_ref v G``,
    which makes ``B`` exactly ``-q_ref A y`` for a Maxwellian source.
    """

    def __init__(self, G: np.ndarray, grid: VelocityGrid, q_ref: float = 1.0, order: int = 6):
        self.grid = grid
        self.q_ref = float(q_ref)
        op = flux_operator(grid, self.q_ref)
        DG = op.relative_gradient(G)
        plan = convolution_plan(grid)
        A = plan.conv_nodes(G)
        B = plan.conv_nodes_vector(DG)
        self._splA = [ndimage.spline_filter(A[..., m], order=3, mode="nearest") for m in range(6)]
        self._splB = [ndimage.spline_filter(B[j], order=3, mode="nearest") for j in range(3)]
        self.multipole = Multipole(G, DG, grid.nodes, grid.cell_volume, order)
        self.node_A = A
        self.node_B = B

    def __call__(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        shape = p.shape[:-1]
        flat = p.reshape(-1, 3)
        g = self.grid
        inside = np.all(np.abs(flat) <= g.extent - 0.5 * g.h, axis=1)
        A = np.empty((flat.shape[0], 6))
        B = np.empty((flat.shape[0], 3))
        if np.any(inside):
            idx = ((flat[inside] + g.extent) / g.h - 0.5).T
            for m in range(6):
                A[inside, m] = ndimage.map_coordinates(self._splA[m], idx, order=3, mode="nearest",
                                                       prefilter=False)
            for j in range(3):
                B[inside, j] = ndimage.map_coordinates(self._splB[j], idx, order=3, mode="nearest",
                                                       prefilter=False)
        if np.any(~inside):
            Ao, Bo = self.multipole(flat[~inside])
            A[~inside] = Ao
            B[~inside] = Bo
        B -= self.q_ref * np.stack([A[:, _FULL[i, 0]] * flat[:, 0] + A[:, _FULL[i, 1]] * flat[:, 1]
                                    + A[:, _FULL[i, 2]] * flat[:, 2] for i in range(3)], axis=1)
        return A.reshape(shape + (6,)), B.reshape(shape + (3,))


def _direct_fields(points: np.ndarray, G: np.ndarray, grid: VelocityGrid, q_ref: float,
                   scale: float, subdiv: int = 3):
    """Direct quadrature of ``sum Phi(y - scale v') {G, grad G}(v') h^3`` at ``points``.

    The drift uses the same split as :class:`ConvolutionEvaluator`.
    """
    op = flux_operator(grid, float(q_ref))
    DG = op.relative_gradient(G)
    w = G.ravel() * grid.cell_volume
    vw = np.moveaxis(DG, 0, -1).reshape(-1, 3) * grid.cell_volume
    flat = points.reshape(-1, 3)
    A, B = kernels.phi_conv_points(flat, grid.points, w, vw, scale, scale * grid.h, subdiv)
    B = B - (q_ref / scale) * np.stack([sum(A[:, _FULL[i, j]] * flat[:, j] for j in range(3))
                                        for i in range(3)], axis=1)
    return A.reshape(points.shape[:-1] + (6,)), B.reshape(points.shape[:-1] + (3,))


def _rows(A_packed: np.ndarray, d: int) -> np.ndarray:
    """Row ``d`` of packed matrices, moved to a leading axis of length 3."""
    return np.stack([A_packed[..., _FULL[d, j]] for j in range(3)], axis=0)


def _batched(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    _check_shape(F, grid)
    return F.reshape((-1,) + grid.shape)


def cross_minus_plus_coefficients(F_minus: np.ndarray, eps: float, egrid: VelocityGrid,
                                  igrid: VelocityGrid, q_e: float = 1.0, q_i: float = 1.0,
                                  mode: str = "fast", split: str = "full") -> List[FluxCoefficients]:
    """Frozen coefficients of ``Q_{-+}^eps(F_minus, .)`` on the ion grid, per batch entry."""
    CollisionConfig(eps, split)
    Fm = _batched(F_minus, egrid)
    op = flux_operator(igrid, float(q_i))
    pts = [eps * op.face_points(d) for d in range(3)]
    out = []
    for b in range(Fm.shape[0]):
        if mode == "fast":
            ev = ConvolutionEvaluator(Fm[b], egrid, q_e)
            fields = [ev(p) for p in pts]
        elif mode == "direct":
            fields = [_direct_fields(p, Fm[b], egrid, q_e, 1.0) for p in pts]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        A = [eps * _rows(fields[d][0], d) for d in range(3)]
        B = [fields[d][1][..., d] for d in range(3)]
        out.append(op.coefficients(A, B, split))
    return out


def q_cross_minus_plus(F_minus: np.ndarray, F_plus: np.ndarray, eps: float,
                       egrid: VelocityGrid, igrid: VelocityGrid, q_e: float = 1.0,
                       q_i: float = 1.0, mode: str = "fast", split: str = "full") -> np.ndarray:
    """Electron-on-ion operator ``Q_{-+}^eps(F_minus, F_plus)`` on the ion grid.

    The face flux is ``eps A(eps f) D F_plus(f) - B(eps f) F_plus(f)`` where
    ``A = Phi * F_minus`` and ``B = Phi * D F_minus`` live on the electron
    grid.  ``mode="fast"`` interpolates FFT tables (multipole outside the
    electron box); ``mode="direct"`` sums the electron nodes directly.
    Leading axes of the two fields must agree and are batched.
    """
    coeffs = cross_minus_plus_coefficients(F_minus, eps, egrid, igrid, q_e, q_i, mode, split)
    Fp = _batched(F_plus, igrid)
    if Fp.shape[0] != len(coeffs):
        raise DomainError("batch axes of the two species differ")
    op = flux_operator(igrid, float(q_i))
    out = np.stack([op.apply(c, Fp[b]) for b, c in enumerate(coeffs)])
    return out.reshape(np.shape(F_plus))


def stack_coefficients(items: Sequence[FluxCoefficients]) -> FluxCoefficients:
    """Batch per-cell coefficients along a new leading (cell) axis."""
    C = [np.stack([it.C[d] for it in items], axis=1) for d in range(3)]
    c = [np.stack([it.c[d] for it in items], axis=0) for d in range(3)]
    return FluxCoefficients(C, c)


def add_coefficients(a: FluxCoefficients, b: FluxCoefficients) -> FluxCoefficients:
    """Coefficients of the sum of two linear fluxes sharing a reference Maxwellian."""
    return FluxCoefficients([x + y for x, y in zip(a.C, b.C)], [x + y for x, y in zip(a.c, b.c)])


def cross_plus_minus_coefficients(F_plus: np.ndarray, eps: float, egrid: VelocityGrid,
                                  igrid: VelocityGrid, q_e: float = 1.0, q_i: float = 1.0,
                                  mode: str = "fast", split: str = "full") -> List[FluxCoefficients]:
    """Frozen coefficients of ``Q_{+-}^eps(F_plus, .)`` per batch entry."""
    CollisionConfig(eps, split)
    Fp = _batched(F_plus, igrid)
    op = flux_operator(egrid, float(q_e))
    pts = [op.face_points(d) for d in range(3)]
    out = []
    for b in range(Fp.shape[0]):
        if mode == "fast":
            ev = ConvolutionEvaluator(Fp[b], igrid, q_i)
            fields = [ev(p / eps) for p in pts]
            scale = 1.0 / eps
        elif mode == "direct":
            fields = [_direct_fields(p, Fp[b], igrid, q_i, eps) for p in pts]
            scale = 1.0
        else:
            raise ValueError(f"unknown mode {mode!r}")
        A = [scale * _rows(fields[d][0], d) for d in range(3)]
        B = [eps * scale * fields[d][1][..., d] for d in range(3)]
        out.append(op.coefficients(A, B, split))
    return out


def q_cross_plus_minus(F_plus: np.ndarray, F_minus: np.ndarray, eps: float,
                       igrid: VelocityGrid, egrid: VelocityGrid, q_e: float = 1.0,
                       q_i: float = 1.0, mode: str = "fast", split: str = "full") -> np.ndarray:
    """Ion-on-electron operator ``Q_{+-}^eps(F_plus, F_minus)`` on the electron grid.

    ``A(xi) = eps^-1 (Phi * F_plus)(xi/eps)`` and likewise for ``B`` by
    homogeneity of the kernel; the face flux is ``A D F_minus - eps B F_minus``.
    """
    coeffs = cross_plus_minus_coefficients(F_plus, eps, egrid, igrid, q_e, q_i, mode, split)
    Fm = _batched(F_minus, egrid)
    if Fm.shape[0] != len(coeffs):
        raise DomainError("batch axes of the two species differ")
    op = flux_operator(egrid, float(q_e))
    out = np.stack([op.apply(c, Fm[b]) for b, c in enumerate(coeffs)])
    return out.reshape(np.shape(F_minus))


def q_cross_plus_minus_limit(n_plus: float, F_minus: np.ndarray, egrid: VelocityGrid,
                             q_e: float = 1.0) -> np.ndarray:
    """Formal limit ``n_plus div(Phi(xi) grad F_minus)`` with the same stencils."""
    op = flux_operator(egrid, float(q_e))
    A, B = [], []
    for d in range(3):
        P = op.face_points(d)
        r2 = np.sum(P * P, axis=-1)
        ir = 1.0 / np.sqrt(r2)
        rows = np.stack([(ir if d == j else 0.0) - P[..., d] * P[..., j] * ir / r2 for j in range(3)])
        A.append(n_plus * rows)
        B.append(np.zeros(P.shape[:-1]))
    return op.apply(op.coefficients(A, B), np.asarray(F_minus, float))


# ---------------------------------------------------------------------------
# linearized operators


def linearized_L(h: np.ndarray, gamma: float, grid: VelocityGrid) -> np.ndarray:
    """Linearized self-collision operator at ``mu = mu_gamma``.

    ``L h = -mu^{-1/2} {Q(mu^{1/2} h, mu) + Q(mu, mu^{1/2} h)}``.  The sign is
    chosen so that ``L`` is nonnegative, which is how it enters the
    perturbation equation ``... + L f = ...``.
    """
    return linearized_L_tilde(h, gamma, gamma, grid)


def linearized_L_tilde(h: np.ndarray, gamma: float, q: float, grid: VelocityGrid) -> np.ndarray:
    """``-mu_q^{-1/2} {Q(mu_q^{1/2} h, mu_gamma) + Q(mu_gamma, mu_q^{1/2} h)}`` (sign as in :func:`linearized_L`)."""
    if not (gamma > 0 and q > 0):
        raise DomainError("gamma and q must be positive")
    mg = maxwellian(gamma, grid)
    sq = np.sqrt(maxwellian(q, grid))
    g = sq * h
    op = flux_operator(grid, float(gamma))
    out = op.apply(op.self_coefficients(g), mg) + op.apply(op.self_coefficients(mg), g)
    return -out / sq


def linearized_M(h: np.ndarray, q: float, G_plus: np.ndarray, eps: float,
                 igrid: VelocityGrid, egrid: VelocityGrid, q_i: float = 1.0,
                 mode: str = "fast") -> np.ndarray:
    """``-mu_q^{-1/2} Q_{+-}^eps(G_plus, mu_q^{1/2} h)``, nonnegative like :func:`linearized_L`."""
    sq = np.sqrt(maxwellian(q, egrid))
    return -q_cross_plus_minus(G_plus, sq * h, eps, igrid, egrid, q_e=q, q_i=q_i, mode=mode) / sq


def gamma_bilinear(h1: np.ndarray, h2: np.ndarray, q: float, grid: VelocityGrid) -> np.ndarray:
    """``-mu_q^{-1/2} Q(mu_q^{1/2} h1, mu_q^{1/2} h2)``."""
    if not q > 0:
        raise DomainError("q must be positive")
    sq = np.sqrt(maxwellian(q, grid))
    return -q_landau(sq * h1, sq * h2, grid, q_ref=q) / sq


# ---------------------------------------------------------------------------
# entropy


@dataclass
class EntropyReport:
    symmetric: float
    direct: float
    floored: bool


FLOOR = 1e-30


def entropy_dissipation(F: np.ndarray, grid: VelocityGrid, q_ref: float = 1.0,
                        report: bool = False):
    """Entropy dissipation ``-int Q(F, F) ln F`` in symmetric double-sum form.

    The symmetric value is ``1/2 sum_ij F_i F_j (g_i - g_j)^T Phi_ij (g_i - g_j) h^6``
    with ``g`` the gradient of ``ln F``; it is nonnegative by construction.
    The direct value uses the flux-form operator.  Values below ``1e-30`` are
    floored before taking logarithms.
    """
    F = np.asarray(F, dtype=float)
    _check_shape(F, grid)
    floored = bool(np.any(F < FLOOR))
    Ff = np.maximum(F, FLOOR)
    lnF = np.log(Ff)
    D = node_derivative(grid.n, grid.h)
    g = np.stack([apply_along(D, lnF, d) for d in range(3)], axis=-1).reshape(-1, 3)
    parts = kernels.entropy_double_sum(grid.points, Ff.ravel(), g)
    symmetric = 0.5 * float(np.sum(np.sort(parts))) * grid.cell_volume ** 2
    direct = -float(np.sum(q_landau(Ff, Ff, grid, q_ref) * lnF)) * grid.cell_volume
    if report:
        return EntropyReport(symmetric, direct, floored)
    return symmetric
