"""Hermite machinery for the electron perturbation and its moment laws.

With ``x = gamma^{1/2} xi`` the raising operator acts on polynomial
prefactors of ``mu_gamma^{1/2}`` as ``p -> x p - p'``, so the unnormalized
Hermite functions are products of probabilists' Hermite polynomials

    h_alpha(xi) = He_alpha(gamma^{1/2} xi) mu_gamma^{1/2}(xi),    ||h_alpha||^2 = alpha!.

The electron distribution is split as ``F = mu_gamma e^{gamma psi} + mu_gamma^{1/2} f``.
Testing the electron kinetic equation against ``p(gamma^{1/2} xi)`` gives,
for each polynomial ``p``, the moment law

    eps d_t S_p - eps (gamma'/2 gamma) S_{x.grad p} + gamma^{-1/2} d_x S_{x_1 p}
        + gamma^{1/2} E S_{d_1 p} - C_p = 0,

where ``S_q = <q mu^{1/2}, f> + e^{gamma psi} E_N[q]`` and ``C_p`` is the
collision moment.  The four laws used here take ``p`` equal to ``1``, ``x_j``,
``(|x|^2 - 3)/sqrt(6)`` and ``sum_k He_{e_j + 2 e_k}(x)/sqrt(10)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import factorial, sqrt
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e

from .collision import q_cross_plus_minus, q_landau
from .phase_grid import DomainError, SpatialGrid, VelocityGrid, maxwellian
from .stencils import apply_along, node_derivative

__all__ = [
    "HermiteIndex",
    "MacroState",
    "TrajectoryFrame",
    "MacroResiduals",
    "ladder_lower",
    "ladder_raise",
    "hermite_fn",
    "hermite_basis",
    "kernel_basis",
    "project",
    "macro_variables",
    "law_polynomials",
    "law_terms",
    "macro_residuals",
]

LAWS = ("mass", "momentum", "energy", "third")


# ---------------------------------------------------------------------------
# ladder operators


def _check_gamma(gamma):
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")


def _axis(h: np.ndarray, j: int) -> int:
    if j not in (0, 1, 2):
        raise DomainError(f"velocity axis must be 0, 1 or 2, got {j}")
    return h.ndim - 3 + j


def _velocity_derivative(h: np.ndarray, j: int, grid: VelocityGrid, method: str) -> np.ndarray:
    ax = _axis(h, j)
    if method == "stencil":
        return apply_along(node_derivative(grid.n, grid.h), h, ax)
    if method == "spectral":
        k = 2 * np.pi * np.fft.rfftfreq(grid.n, grid.h)
        shape = [1] * h.ndim
        shape[ax] = k.size
        return np.fft.irfft(1j * k.reshape(shape) * np.fft.rfft(h, axis=ax), n=grid.n, axis=ax)
    raise ValueError(f"unknown derivative method {method!r}")


def ladder_lower(h: np.ndarray, j: int, gamma: float, grid: VelocityGrid,
                 method: str = "spectral") -> np.ndarray:
    """``A_j h = gamma^{1/2} xi_j h / 2 + gamma^{-1/2} d_j h``.

    ``method="spectral"`` differentiates with the Fourier series of the
    truncated box, accurate while ``h`` is negligible at the box edge;
    ``method="stencil"`` uses the fourth-order node stencil.
    """
    _check_gamma(gamma)
    xi = grid.mesh[j]
    return 0.5 * sqrt(gamma) * xi * h + _velocity_derivative(h, j, grid, method) / sqrt(gamma)


def ladder_raise(h: np.ndarray, j: int, gamma: float, grid: VelocityGrid,
                 method: str = "spectral") -> np.ndarray:
    """``A_j^* h = gamma^{1/2} xi_j h / 2 - gamma^{-1/2} d_j h``."""
    _check_gamma(gamma)
    xi = grid.mesh[j]
    return 0.5 * sqrt(gamma) * xi * h - _velocity_derivative(h, j, grid, method) / sqrt(gamma)


# ---------------------------------------------------------------------------
# Hermite functions


@dataclass(frozen=True)
class HermiteIndex:
    """Multiset of velocity axes (0-based), at most four entries.

    ``HermiteIndex((0, 1))`` denotes ``A_0^* A_1^* mu^{1/2}``.
    """

    orders: Tuple[int, ...] = ()

    def __post_init__(self):
        orders = tuple(int(j) for j in self.orders)
        if len(orders) > 4:
            raise DomainError("Hermite indices longer than 4 are not supported")
        if any(j not in (0, 1, 2) for j in orders):
            raise DomainError(f"axes must lie in {{0, 1, 2}}, got {orders}")
        object.__setattr__(self, "orders", tuple(sorted(orders)))

    @property
    def alpha(self) -> Tuple[int, int, int]:
        """Exponent multi-index ``(n_0, n_1, n_2)``."""
        return tuple(self.orders.count(j) for j in range(3))

    @property
    def norm_squared(self) -> int:
        a = self.alpha
        return factorial(a[0]) * factorial(a[1]) * factorial(a[2])


def _he(n: int, x: np.ndarray) -> np.ndarray:
    c = np.zeros(n + 1)
    c[n] = 1.0
    return hermite_e.hermeval(x, c)


def _hermite_alpha(alpha, gamma: float, grid: VelocityGrid) -> np.ndarray:
    x = sqrt(gamma) * grid.nodes
    sq = np.sqrt(maxwellian(gamma, grid))
    f = [_he(alpha[j], x) for j in range(3)]
    return f[0][:, None, None] * f[1][None, :, None] * f[2][None, None, :] * sq


def hermite_fn(index, gamma: float, grid: VelocityGrid, normalized: bool = False) -> np.ndarray:
    """Hermite function ``h_index`` on the grid, from exact polynomial formulas.

    Parameters
    ----------
    index : HermiteIndex or sequence of axes
    gamma : float
        Inverse temperature of the underlying Maxwellian.
    normalized : bool
        Divide by ``sqrt(alpha!)`` so the family is orthonormal.
    """
    _check_gamma(gamma)
    idx = index if isinstance(index, HermiteIndex) else HermiteIndex(tuple(index))
    out = _hermite_alpha(idx.alpha, gamma, grid)
    if normalized:
        out = out / sqrt(idx.norm_squared)
    return out


def hermite_basis(max_order: int, gamma: float, grid: VelocityGrid, normalized: bool = True):
    """All Hermite functions of total degree at most ``max_order``.

    Returns
    -------
    alphas : list of tuple
    stack : ndarray (K, n, n, n)
    """
    alphas = [a for k in range(max_order + 1) for a in product(range(k + 1), repeat=3) if sum(a) == k]
    stack = []
    for a in alphas:
        h = _hermite_alpha(a, gamma, grid)
        if normalized:
            h = h / sqrt(factorial(a[0]) * factorial(a[1]) * factorial(a[2]))
        stack.append(h)
    return alphas, np.stack(stack)


def kernel_basis(gamma: float, grid: VelocityGrid) -> np.ndarray:
    """Orthonormal kernel elements ``h, h_1, h_2, h_3, sum_j h_jj / sqrt(6)``."""
    e = np.eye(3, dtype=int)
    hs = [_hermite_alpha((0, 0, 0), gamma, grid)]
    hs += [_hermite_alpha(tuple(e[j]), gamma, grid) for j in range(3)]
    hs.append(sum(_hermite_alpha(tuple(2 * e[j]), gamma, grid) for j in range(3)) / sqrt(6.0))
    return np.stack(hs)


def _third_functions(gamma: float, grid: VelocityGrid) -> np.ndarray:
    """``sum_k h_jkk / sqrt(10)`` for each ``j``."""
    e = np.eye(3, dtype=int)
    return np.stack([sum(_hermite_alpha(tuple(e[j] + 2 * e[k]), gamma, grid) for k in range(3))
                     for j in range(3)]) / sqrt(10.0)


# ---------------------------------------------------------------------------
# projection


@dataclass
class MacroState:
    """Macroscopic coefficients of a perturbation, one entry per spatial cell.

    ``a`` density, ``b`` scaled current, ``c`` scaled energy and ``d`` the
    third-moment coefficient.  Unbatched inputs give 0-d/1-d arrays.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    gamma: float

    def __post_init__(self):
        _check_gamma(self.gamma)
        for name in ("a", "b", "c", "d"):
            val = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(val)):
                raise DomainError(f"macro variable {name} is not finite")
            setattr(self, name, val)

    def as_array(self) -> np.ndarray:
        """Stack ``(a, b_1, b_2, b_3, c)`` on the last axis."""
        return np.concatenate([self.a[..., None], self.b, self.c[..., None]], axis=-1)


def _inner(basis: np.ndarray, f: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Grid inner products of each basis element with ``f`` (batched over leading axes)."""
    return np.einsum("kijl,...ijl->...k", basis, f) * grid.cell_volume


def project(f: np.ndarray, gamma: float, grid: VelocityGrid):
    """Orthogonal projection onto the kernel of the linearized operator.

    The projection is orthogonal in the grid inner product (a five by five
    Gram solve), so ``f_perp`` is orthogonal to every kernel element to
    rounding; the coefficients equal ``<h, f>``, ``<h_j, f>`` and
    ``<h_jj/sqrt(6), f>`` up to the Gram defect of the truncated grid.

    Returns
    -------
    MacroState, ndarray
        Coefficients and ``f - P f``.
    """
    _check_gamma(gamma)
    f = np.asarray(f, dtype=float)
    if f.shape[-3:] != grid.shape:
        raise DomainError(f"field shape {f.shape} does not match grid {grid.shape}")
    K = kernel_basis(gamma, grid)
    gram = _inner(K, K, grid)
    coef = np.linalg.solve(gram, _inner(K, f, grid)[..., None])[..., 0] if f.ndim > 3 else \
        np.linalg.solve(gram, _inner(K, f, grid))
    Pf = np.einsum("...k,kijl->...ijl", coef, K)
    d = _inner(_third_functions(gamma, grid), f, grid)
    state = MacroState(a=coef[..., 0], b=coef[..., 1:4], c=coef[..., 4], d=d, gamma=gamma)
    return state, f - Pf


def macro_variables(F_minus: np.ndarray, gamma: float, psi, grid: VelocityGrid) -> MacroState:
    """Macro state of ``f = mu_gamma^{-1/2} (F_minus - mu_gamma e^{gamma psi})``."""
    mu = maxwellian(gamma, grid)
    psi = np.asarray(psi, dtype=float)
    f = (np.asarray(F_minus, float) - np.exp(gamma * psi)[..., None, None, None] * mu) / np.sqrt(mu)
    return project(f, gamma, grid)[0]


# ---------------------------------------------------------------------------
# polynomial algebra in the Hermite basis

Poly = Dict[Tuple[int, int, int], float]


def _add(acc: Poly, key, val):
    if val:
        acc[key] = acc.get(key, 0.0) + val


def _mul_x(p: Poly, i: int) -> Poly:
    """``x_i p`` using ``x He_n = He_{n+1} + n He_{n-1}``."""
    out: Poly = {}
    for a, c in p.items():
        up = list(a)
        up[i] += 1
        _add(out, tuple(up), c)
        if a[i]:
            dn = list(a)
            dn[i] -= 1
            _add(out, tuple(dn), c * a[i])
    return out


def _deriv(p: Poly, i: int) -> Poly:
    """``d_i p`` using ``He_n' = n He_{n-1}``."""
    out: Poly = {}
    for a, c in p.items():
        if a[i]:
            dn = list(a)
            dn[i] -= 1
            _add(out, tuple(dn), c * a[i])
    return out


def _euler(p: Poly) -> Poly:
    out: Poly = {}
    for i in range(3):
        for k, v in _mul_x(_deriv(p, i), i).items():
            _add(out, k, v)
    return out


def law_polynomials() -> Dict[str, List[Poly]]:
    """Test polynomials (Hermite coefficients) of the four moment laws."""
    e = [tuple(int(j == k) for k in range(3)) for j in range(3)]
    mass = [{(0, 0, 0): 1.0}]
    mom = [{e[j]: 1.0} for j in range(3)]
    energy = [{tuple(2 * c for c in e[j]): 1 / sqrt(6.0) for j in range(3)}]
    third = []
    for j in range(3):
        p: Poly = {}
        for k in range(3):
            _add(p, tuple(a + 2 * b for a, b in zip(e[j], e[k])), 1 / sqrt(10.0))
        third.append(p)
    return {"mass": mass, "momentum": mom, "energy": energy, "third": third}


# ---------------------------------------------------------------------------
# moment laws along a trajectory


@dataclass
class TrajectoryFrame:
    """One stored state: electron/ion distributions per cell and the fields.

    ``E`` is the electric field along the periodic axis, ``(gamma, psi)`` the
    reference inverse temperature and potential used for the splitting.
    """

    t: float
    F_minus: np.ndarray
    E: np.ndarray
    gamma: float
    psi: np.ndarray
    F_plus: Optional[np.ndarray] = None


@dataclass
class MacroResiduals:
    """``L^2_x`` norms of the four law residuals at each frame time."""

    times: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray
    energy: np.ndarray
    third: np.ndarray
    terms: List[dict] = field(default_factory=list, repr=False)

    def rows(self):
        for k, t in enumerate(self.times):
            yield (float(t), float(self.mass[k]), float(self.momentum[k]), float(self.energy[k]),
                   float(self.third[k]))


def _moments(F: np.ndarray, basis: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    return _inner(basis, F, grid)


def law_terms(frames: Sequence[TrajectoryFrame], eps: float, xgrid: SpatialGrid,
              egrid: VelocityGrid, igrid: Optional[VelocityGrid] = None, q_i: float = 1.0,
              collisions: bool = True, cross_mode: str = "fast") -> List[Dict[str, dict]]:
    """Each term of every moment law at every frame, per cell.

    Terms are ``time`` (``eps d_t`` of the macro variable), ``equilibrium``
    (``eps E_N[p] d_t e^{gamma psi}``), ``temperature``, ``transport``,
    ``field``, ``self_collision`` and ``cross_collision``; the residual is
    their sum.  The collision terms are ``-<p, Q(F,F)>`` and
    ``-<p, Q_{+-}(F_+, F)>``, which equal the projections of
    ``e^{gamma psi} L f + Gamma(f, f)`` and ``M f + e^{gamma psi} M h``.
    """
    if len(frames) < 3:
        raise DomainError("at least three snapshots are required for time differencing")
    times = np.array([fr.t for fr in frames], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise DomainError("frame times must increase strictly")
    polys = law_polynomials()
    nf = len(frames)
    gammas = np.array([fr.gamma for fr in frames], dtype=float)
    gdot = np.gradient(gammas, times, edge_order=2)
    # every Hermite coefficient needed: degree <= 4
    keys = set()
    for plist in polys.values():
        for p in plist:
            keys.update(p)
            keys.update(_euler(p))
            keys.update(_mul_x(p, 0))
            keys.update(_deriv(p, 0))
    keys = sorted(keys)
    pos = {k: i for i, k in enumerate(keys)}

    S = []  # S[frame][key] per cell (moments of F against He_alpha(sqrt(gamma) xi))
    Cself, Ccross, eq = [], [], []
    for fr in frames:
        _check_gamma(fr.gamma)
        He = np.stack([_hermite_alpha(k, fr.gamma, egrid) / np.sqrt(maxwellian(fr.gamma, egrid))
                       for k in keys])
        F = np.asarray(fr.F_minus, float)
        S.append(_moments(F, He, egrid))
        eq.append(np.exp(fr.gamma * np.asarray(fr.psi, float)))
        if collisions:
            Qs = q_landau(F, F, egrid, q_ref=fr.gamma)
            Cself.append(_moments(Qs, He, egrid))
            if fr.F_plus is not None:
                if igrid is None:
                    raise DomainError("ion grid required for the cross-collision term")
                Qc = q_cross_plus_minus(fr.F_plus, F, eps, igrid, egrid, q_e=fr.gamma, q_i=q_i,
                                        mode=cross_mode)
                Ccross.append(_moments(Qc, He, egrid))
            else:
                Ccross.append(np.zeros_like(S[-1]))
        else:
            Cself.append(np.zeros_like(S[-1]))
            Ccross.append(np.zeros_like(S[-1]))
    S = np.stack(S)            # (nf, nx, K)
    Cself = np.stack(Cself)
    Ccross = np.stack(Ccross)
    eq = np.stack(eq)          # (nf, nx)

    def lin(P: Poly, arr):
        return sum(c * arr[..., pos[k]] for k, c in P.items()) if P else np.zeros(arr.shape[:-1])

    def mean(P: Poly):
        return P.get((0, 0, 0), 0.0)

    out: List[Dict[str, dict]] = [dict() for _ in range(nf)]
    for law, plist in polys.items():
        per_comp = []
        for p in plist:
            Sp = lin(p, S)
            m = Sp - mean(p) * eq                       # <p mu^{1/2}, f>
            time = eps * np.gradient(m, times, axis=0, edge_order=2)
            equil = eps * mean(p) * np.gradient(eq, times, axis=0, edge_order=2)
            temp = -eps * (gdot / (2 * gammas))[:, None] * lin(_euler(p), S)
            trans = np.stack([xgrid.derivative(lin(_mul_x(p, 0), S[k])) for k in range(nf)]) \
                / np.sqrt(gammas)[:, None]
            E = np.stack([np.asarray(fr.E, float) for fr in frames])
            fld = np.sqrt(gammas)[:, None] * E * lin(_deriv(p, 0), S)
            cs = -lin(p, Cself)
            cc = -lin(p, Ccross)
            per_comp.append(dict(time=time, equilibrium=equil, temperature=temp, transport=trans,
                                 field=fld, self_collision=cs, cross_collision=cc))
        for k in range(nf):
            out[k][law] = {name: np.stack([c[name][k] for c in per_comp]) for name in per_comp[0]}
    return out


def macro_residuals(frames: Sequence[TrajectoryFrame], eps: float, xgrid: SpatialGrid,
                    egrid: VelocityGrid, igrid: Optional[VelocityGrid] = None, q_i: float = 1.0,
                    collisions: bool = True, cross_mode: str = "fast",
                    keep_terms: bool = False) -> MacroResiduals:
    """``L^2_x`` norms of the mass, momentum, energy and third-moment law residuals.

    Time derivatives are centered differences on the frame times, with
    one-sided second-order stencils at the ends.  Vector laws report the
    norm over all components.
    """
    terms = law_terms(frames, eps, xgrid, egrid, igrid, q_i, collisions, cross_mode)
    res = {law: np.empty(len(frames)) for law in LAWS}
    for k, tk in enumerate(terms):
        for law in LAWS:
            total = sum(tk[law].values())
            res[law][k] = sqrt(float(np.sum(total ** 2)) * xgrid.dx)
    times = np.array([fr.t for fr in frames], dtype=float)
    return MacroResiduals(times, res["mass"], res["momentum"], res["energy"], res["third"],
                          terms if keep_terms else [])
