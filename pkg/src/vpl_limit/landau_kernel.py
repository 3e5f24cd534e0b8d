"""The Landau kernel, its convolutions, the diffusion matrix and dissipation norms.

The kernel ``Phi(z) = (I - z z^T / |z|^2) / |z|`` is tabulated once per
velocity grid.  Convolutions ``Phi * G`` are linear (zero padded) and are
evaluated with real FFTs of size ``2n`` per axis; the direct-summation
kernels in :mod:`vpl_limit.kernels` act as oracles.

Symmetric matrices are handled in packed form with the six entries
``(xx, xy, xz, yy, yz, zz)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from . import kernels
from .phase_grid import (DomainError, SpatialGrid, VelocityGrid, integrate as v_integrate,
                         maxwellian)
from .stencils import apply_along, central_derivative2

__all__ = [
    "SYM",
    "pack",
    "unpack",
    "phi",
    "inverse_distance_cube_constant",
    "phi_cell_average",
    "KernelField",
    "ConvolutionPlan",
    "conv_phi",
    "sigma",
    "sigma_exact",
    "NormSpec",
    "random_nonnegative_field",
    "norm",
    "BoundsReport",
    "verify_kernel_bounds",
    "CapabilityError",
    "SingularityError",
]

SYM = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
_FULL = np.array([[0, 1, 2], [1, 3, 4], [2, 4, 5]])
DIRECT_MAX_N = 24


class CapabilityError(RuntimeError):
    """Raised when a requested evaluation mode cannot handle the input size."""


class SingularityError(ZeroDivisionError):
    """Raised when the kernel is evaluated at the origin."""


def pack(M: np.ndarray) -> np.ndarray:
    """Packed six entries of symmetric matrices stored on the last two axes."""
    return np.stack([M[..., i, j] for i, j in SYM], axis=-1)


def unpack(P: np.ndarray) -> np.ndarray:
    """Full ``3x3`` matrices from packed entries on the last axis."""
    return P[..., _FULL]


def phi(z) -> np.ndarray:
    """Landau kernel ``(I - z z^T/|z|^2)/|z|``.

    Examples
    --------
    >>> phi((1.0, 0.0, 0.0))
    array([[0., 0., 0.],
           [0., 1., 0.],
           [0., 0., 1.]])
    """
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    if np.any(r2 == 0.0):
        raise SingularityError("phi is singular at z = 0")
    r = np.sqrt(r2)[..., None, None]
    zz = z[..., :, None] * z[..., None, :]
    return (np.eye(3) - zz / r ** 2) / r


def _phi_packed(z: np.ndarray) -> np.ndarray:
    """Packed kernel entries; zero where ``z = 0``."""
    r2 = np.sum(z * z, axis=-1)
    safe = np.where(r2 > 0, r2, 1.0)
    ir = np.where(r2 > 0, 1.0 / np.sqrt(safe), 0.0)
    ir3 = ir / safe
    out = np.empty(z.shape[:-1] + (6,))
    for m, (i, j) in enumerate(SYM):
        out[..., m] = (ir if i == j else 0.0) - z[..., i] * z[..., j] * ir3
    return out


@lru_cache(maxsize=None)
def inverse_distance_cube_constant() -> float:
    """``K = int over [-1/2, 1/2]^3 of 1/|z|``.

    The cube splits into six pyramids with apex at the origin; in each the
    radial integral is explicit, leaving the smooth face integral
    ``K = 3 int_{[0,1]^2} (1 + s^2 + t^2)^{-1/2} ds dt``.
    """
    val, _ = integrate.dblquad(lambda t, s: 1.0 / np.sqrt(1.0 + s * s + t * t),
                               0.0, 1.0, 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    return 3.0 * val


def origin_cell_value(h: float) -> float:
    """Diagonal entry of the cube average of ``Phi`` over the cell centred at 0."""
    return (2.0 / 3.0) * inverse_distance_cube_constant() / h


@lru_cache(maxsize=8)
def _gauss_cube(order: int, subdiv: int):
    x, w = leggauss(order)
    x = 0.5 * x
    w = 0.5 * w
    sub = (np.arange(subdiv) + 0.5) / subdiv - 0.5
    pts = (sub[:, None] + x[None, :] / subdiv).ravel()
    wts = np.tile(w / subdiv, subdiv)
    px, py, pz = np.meshgrid(pts, pts, pts, indexing="ij")
    W = wts[:, None, None] * wts[None, :, None] * wts[None, None, :]
    return np.stack([px.ravel(), py.ravel(), pz.ravel()], axis=1), W.ravel()


def _cell_average_packed(centers: np.ndarray, h: float) -> np.ndarray:
    """Packed cube averages of ``Phi`` for centres off the origin cell."""
    centers = np.atleast_2d(centers)
    out = np.empty(centers.shape[:-1] + (6,))
    dist = np.max(np.abs(centers), axis=-1) / h
    near = dist < 3.0
    for mask, (order, subdiv) in ((near, (6, 4)), (~near, (4, 1))):
        if not np.any(mask):
            continue
        q, w = _gauss_cube(order, subdiv)
        c = centers[mask]
        vals = np.empty((c.shape[0], 6))
        for s in range(0, c.shape[0], 2048):
            z = c[s:s + 2048, None, :] + h * q[None, :, :]
            vals[s:s + 2048] = np.einsum("pqm,q->pm", _phi_packed(z), w)
        out[mask] = vals
    return out


def phi_cell_average(cell_center, h: float) -> np.ndarray:
    """Average of ``Phi`` over the cube of edge ``h`` centred at ``cell_center``.

    The origin cell uses the exact value ``(2/3) <1/|z|> I`` obtained from the
    cubic symmetry of the cell; other cells use tensor Gauss-Legendre
    quadrature, subdivided close to the singularity.
    """
    if not h > 0:
        raise DomainError("cell size must be positive")
    c = np.asarray(cell_center, dtype=float)
    if np.max(np.abs(c)) < 1e-12 * h:
        return origin_cell_value(h) * np.eye(3)
    if np.max(np.abs(c)) < 0.5 * h:
        raise DomainError("cells straddling the origin off-centre are not supported")
    return unpack(_cell_average_packed(c[None, :], h)[0])


@dataclass
class KernelField:
    """Symmetric ``3x3`` matrices per velocity node in packed form.

    ``packed`` has shape ``(..., n, n, n, 6)``.
    """

    packed: np.ndarray
    grid: VelocityGrid

    @property
    def matrices(self) -> np.ndarray:
        return unpack(self.packed)

    def trace(self) -> np.ndarray:
        return self.packed[..., 0] + self.packed[..., 3] + self.packed[..., 5]

    def quadratic(self, nu: np.ndarray) -> np.ndarray:
        """``nu^T M nu`` with ``nu`` broadcast against the node axes."""
        nu = np.asarray(nu, dtype=float)
        return np.einsum("...i,...ij,...j->...", nu, self.matrices, nu)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Matrix-vector product; ``u`` has a trailing axis of length 3."""
        return np.einsum("...ij,...j->...i", self.matrices, u)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrices)


def _offset_index(n: int, half: bool = False) -> np.ndarray:
    """Offsets (in cells) stored at each index of a length ``2n`` FFT axis."""
    k = np.fft.fftfreq(2 * n, d=1.0 / (2 * n)).astype(float)
    valid = np.abs(k) <= n - 1
    return (k + (0.5 if half else 0.0)), valid


class ConvolutionPlan:
    """Cached kernel spectra for linear convolutions on one velocity grid.

    Parameters
    ----------
    grid : VelocityGrid
    kernel : {"point", "cell"}
        ``"point"`` tabulates ``Phi`` at the offsets with the exact cube
        average at zero offset; ``"cell"`` uses cube averages everywhere.
    """

    def __init__(self, grid: VelocityGrid, kernel: str = "point"):
        if kernel not in ("point", "cell"):
            raise ValueError(f"unknown kernel table {kernel!r}")
        self.grid = grid
        self.kernel = kernel
        n = grid.n
        self.n = n
        self.fft_shape = (2 * n,) * 3
        self._node_hat = self._spectrum(self._table(None))
        self._face_hat = {}

    def _table(self, face_axis: Optional[int]) -> np.ndarray:
        n, h = self.n, self.grid.h
        axes = []
        mask = None
        for d in range(3):
            k, valid = _offset_index(n, half=(d == face_axis))
            axes.append(k * h)
            m = valid.reshape([-1 if e == d else 1 for e in range(3)])
            mask = m if mask is None else (mask & m)
        zx, zy, zz = np.meshgrid(*axes, indexing="ij")
        z = np.stack([zx, zy, zz], axis=-1)
        if self.kernel == "cell" and face_axis is None:
            T = np.zeros(z.shape[:-1] + (6,))
            flat = z.reshape(-1, 3)
            origin = np.all(flat == 0.0, axis=1)
            vals = np.zeros((flat.shape[0], 6))
            vals[~origin] = _cell_average_packed(flat[~origin], h)
            T = vals.reshape(T.shape)
        else:
            T = _phi_packed(z)
        if face_axis is None:
            o = origin_cell_value(h)
            T[0, 0, 0] = [o, 0.0, 0.0, o, 0.0, o]
        T = T * mask[..., None]
        return np.moveaxis(T, -1, 0)

    def _spectrum(self, T: np.ndarray) -> np.ndarray:
        return sfft.rfftn(T, s=self.fft_shape, axes=(-3, -2, -1)) * self.grid.cell_volume

    def face_spectrum(self, d: int) -> np.ndarray:
        """Spectra of ``Phi_{d,j}`` (j = 0, 1, 2) at offsets shifted half a cell along ``d``."""
        if d not in self._face_hat:
            T = self._table(d)
            rows = [int(_FULL[d, j]) for j in range(3)]
            self._face_hat[d] = self._spectrum(T[rows])
        return self._face_hat[d]

    def forward(self, G: np.ndarray) -> np.ndarray:
        return sfft.rfftn(G, s=self.fft_shape, axes=(-3, -2, -1))

    def inverse(self, Ghat: np.ndarray) -> np.ndarray:
        n = self.n
        return sfft.irfftn(Ghat, s=self.fft_shape, axes=(-3, -2, -1))[..., :n, :n, :n]

    def conv_nodes(self, G: np.ndarray) -> np.ndarray:
        """Packed ``Phi * G`` at the nodes, shape ``G.shape + (6,)``."""
        Ghat = self.forward(G)
        out = np.stack([self.inverse(self._node_hat[m] * Ghat) for m in range(6)], axis=-1)
        return out

    def conv_nodes_vector(self, V: np.ndarray) -> np.ndarray:
        """``(Phi * V)_i = sum_j Phi_ij * V_j`` at nodes; ``V`` has a leading axis of length 3."""
        Vhat = [self.forward(V[j]) for j in range(3)]
        return np.stack(
            [self.inverse(sum(self._node_hat[_FULL[i, j]] * Vhat[j] for j in range(3)))
             for i in range(3)], axis=0)

    def conv_faces(self, G: np.ndarray, DG: np.ndarray):
        """Face values of ``A = Phi * G`` (row ``d``) and ``B = Phi * DG`` along each axis.

        Returns
        -------
        A : list of arrays, ``A[d]`` of shape ``(3,) + face_shape``
        B : list of arrays, ``B[d]`` of shape ``face_shape``
        """
        n = self.n
        Ghat = self.forward(G)
        DGhat = [self.forward(DG[j]) for j in range(3)]
        A, B = [], []
        for d in range(3):
            K = self.face_spectrum(d)
            sl = [slice(None)] * 3
            sl[d] = slice(0, n - 1)
            sl = (Ellipsis,) + tuple(sl)
            A.append(np.stack([self.inverse(K[j] * Ghat)[sl] for j in range(3)], axis=0))
            B.append(self.inverse(K[0] * DGhat[0] + K[1] * DGhat[1] + K[2] * DGhat[2])[sl])
        return A, B


@lru_cache(maxsize=16)
def convolution_plan(grid: VelocityGrid, kernel: str = "point") -> ConvolutionPlan:
    return ConvolutionPlan(grid, kernel)


def conv_phi(G: np.ndarray, grid: VelocityGrid, mode: str = "fft", kernel: str = "point") -> KernelField:
    """Linear discrete convolution ``h^3 sum_j T(v_i - v_j) G_j`` with the kernel table ``T``.

    Parameters
    ----------
    G : ndarray
        Values on ``grid``; leading axes are batched.
    mode : {"fft", "direct"}
        ``"direct"`` is the compiled double loop, restricted to point tables and
        ``n <= 24``.
    kernel : {"point", "cell"}
    """
    G = np.asarray(G, dtype=float)
    if mode == "fft":
        return KernelField(convolution_plan(grid, kernel).conv_nodes(G), grid)
    if mode != "direct":
        raise ValueError(f"unknown mode {mode!r}")
    if kernel != "point":
        raise CapabilityError("direct mode evaluates the point table only")
    if grid.n > DIRECT_MAX_N:
        raise CapabilityError(f"direct mode limited to n <= {DIRECT_MAX_N}, got {grid.n}")
    o = origin_cell_value(grid.h)
    if G.ndim == 3:
        out = kernels.conv_phi_direct(np.ascontiguousarray(G), grid.nodes, grid.h, o)
    else:
        flat = G.reshape((-1,) + grid.shape)
        out = np.stack([kernels.conv_phi_direct(np.ascontiguousarray(g), grid.nodes, grid.h, o)
                        for g in flat]).reshape(G.shape + (6,))
    return KernelField(np.asarray(out), grid)


@lru_cache(maxsize=16)
def _sigma_cached(grid: VelocityGrid) -> KernelField:
    return conv_phi(maxwellian(1.0, grid), grid)


def sigma(grid: VelocityGrid) -> KernelField:
    """Discrete ``sigma = Phi * mu_1`` on the grid nodes, memoized per grid."""
    return _sigma_cached(grid)


def sigma_eigen_exact(r, q: float = 1.0):
    """Eigenvalues of ``Phi * mu_q`` along and across ``v`` at speed ``r``.

    With ``psi(r) = E|r e - X|`` for ``X`` standard normal,
    ``psi(r) = (r + 1/r) erf(r/sqrt 2) + sqrt(2/pi) exp(-r^2/2)`` and the
    eigenvalues are ``psi''(r)`` and ``psi'(r)/r``.  Scaling ``v -> sqrt(q) v``
    covers other temperatures.
    """
    r = np.sqrt(q) * np.asarray(r, dtype=float)
    c = np.sqrt(2.0 / np.pi)
    small = r < 0.02
    rs = np.where(small, 1.0, r)
    E = special.erf(rs / np.sqrt(2.0))
    g = c * np.exp(-0.5 * rs ** 2)
    lam_par = 2.0 * E / rs ** 3 - 2.0 * g / rs ** 2
    lam_perp = (1.0 - 1.0 / rs ** 2) * E / rs + g / rs ** 2
    r2 = r ** 2
    ser_par = c * (2.0 / 3.0 - r2 / 5.0 + r2 ** 2 / 28.0 - r2 ** 3 / 216.0)
    ser_perp = c * (2.0 / 3.0 - r2 / 15.0 + r2 ** 2 / 140.0 - r2 ** 3 / 1512.0)
    lam_par = np.where(small, ser_par, lam_par)
    lam_perp = np.where(small, ser_perp, lam_perp)
    return np.sqrt(q) * lam_par, np.sqrt(q) * lam_perp


def sigma_exact(points: np.ndarray, q: float = 1.0) -> np.ndarray:
    """Closed-form ``Phi * mu_q`` at arbitrary points, packed, shape ``points.shape[:-1] + (6,)``."""
    p = np.asarray(points, dtype=float)
    r = np.sqrt(np.sum(p * p, axis=-1))
    lam_par, lam_perp = sigma_eigen_exact(r, q)
    rs = np.where(r > 0, r, 1.0)
    u = p / rs[..., None]
    out = np.empty(p.shape[:-1] + (6,))
    for m, (i, j) in enumerate(SYM):
        uu = u[..., i] * u[..., j]
        out[..., m] = lam_par * uu + lam_perp * ((i == j) - uu)
    return out


def _grid_points(grid: VelocityGrid) -> np.ndarray:
    vx, vy, vz = np.meshgrid(grid.nodes, grid.nodes, grid.nodes, indexing="ij")
    return np.stack([vx, vy, vz], axis=-1)


@dataclass(frozen=True)
class NormSpec:
    """Which dissipation norm to evaluate.

    ``kind`` is one of ``H_sigma``, ``Hdot_sigma``, ``H_plus_eps``,
    ``H_minus_eps``; the last two require ``eps``.
    """

    kind: str
    eps: Optional[float] = None

    def __post_init__(self):
        kinds = ("H_sigma", "Hdot_sigma", "H_plus_eps", "H_minus_eps")
        if self.kind not in kinds:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        scaled = self.kind in ("H_plus_eps", "H_minus_eps")
        if scaled and (self.eps is None or not self.eps > 0):
            raise ValueError(f"norm kind {self.kind} requires a positive eps")
        if not scaled and self.eps is not None:
            raise ValueError(f"norm kind {self.kind} takes no eps")


@lru_cache(maxsize=32)
def _scaled_sigma(grid: VelocityGrid, kind: str, eps: Optional[float]) -> np.ndarray:
    pts = _grid_points(grid)
    if kind == "H_plus_eps":
        return eps * sigma_exact(eps * pts)
    return sigma_exact(pts / eps) / eps


def velocity_gradient(h: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Second-order central-difference gradient, stacked on a new trailing axis."""
    D = central_derivative2(grid.n, grid.h)
    nd = h.ndim
    return np.stack([apply_along(D, h, nd - 3 + d) for d in range(3)], axis=-1)


def norm_squared(h: np.ndarray, spec: NormSpec, grid: VelocityGrid,
                 xgrid: Optional[SpatialGrid] = None) -> float:
    """Squared norm; see :func:`norm`."""
    h = np.asarray(h, dtype=float)
    if spec.kind in ("H_sigma", "Hdot_sigma"):
        S = sigma(grid).packed
    else:
        S = _scaled_sigma(grid, spec.kind, spec.eps)
    grad = velocity_gradient(h, grid)
    M = unpack(S)
    dens = np.einsum("...i,...ij,...j->...", grad, M, grad)
    if spec.kind == "H_sigma":
        dens = dens + (S[..., 0] + S[..., 3] + S[..., 5]) * h * h
    per_cell = np.sum(dens, axis=(-3, -2, -1)) * grid.cell_volume
    if np.ndim(per_cell) == 0:
        return float(per_cell)
    dx = xgrid.dx if xgrid is not None else 1.0 / per_cell.shape[0]
    return float(np.sum(per_cell) * dx)


def norm(h: np.ndarray, spec: NormSpec, grid: VelocityGrid,
         xgrid: Optional[SpatialGrid] = None) -> float:
    """Dissipation norm of ``h`` (signed values allowed).

    ``H_sigma`` is ``<sigma grad h, grad h> + <tr(sigma) h, h>``; ``Hdot_sigma``
    drops the zeroth-order term; ``H_plus_eps`` uses ``eps sigma(eps v)`` and
    ``H_minus_eps`` uses ``sigma(v/eps)/eps``.  The scaled variants evaluate
    ``sigma`` in closed form off the grid.  When ``h`` carries a leading
    spatial axis the result is integrated over the torus.
    """
    return float(np.sqrt(max(norm_squared(h, spec, grid, xgrid), 0.0)))


@dataclass
class BoundsReport:
    upper_ratio_max: float
    lower_ratio_min: float
    upper_ratio_min: float
    lower_ratio_max: float
    trials: int
    grid: dict
    violations: int
    upper_constant: float
    lower_constant: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "upper_ratio_max": self.upper_ratio_max,
            "lower_ratio_min": self.lower_ratio_min,
            "trials": self.trials,
            "grid": self.grid,
        }


def kernel_bound_ratios(G: np.ndarray, grid: VelocityGrid, v_idx: np.ndarray, nus: np.ndarray):
    """Ratios of the two sides of the upper and lower kernel bounds at sampled ``(v, nu)``.

    ``upper = |Phi*G nu.nu| / (||<v>^5 G||_2 sigma nu.nu)`` and
    ``lower = Phi*G nu.nu / (m / <||<v>^2 G||_2 / m>^17 sigma nu.nu)`` with ``m = ||G||_1``.
    """
    G = np.asarray(G, dtype=float)
    if np.any(G < 0):
        raise DomainError("G must be nonnegative")
    mass = float(v_integrate(G, grid))
    if not mass > 0:
        raise DomainError("G must have positive mass")
    jb = np.sqrt(1.0 + grid.speed_squared)
    l2_5 = np.sqrt(v_integrate((jb ** 5 * G) ** 2, grid))
    l2_2 = np.sqrt(v_integrate((jb ** 2 * G) ** 2, grid))
    A = conv_phi(G, grid).packed[v_idx[:, 0], v_idx[:, 1], v_idx[:, 2]]
    S = sigma(grid).packed[v_idx[:, 0], v_idx[:, 1], v_idx[:, 2]]
    qa = np.einsum("ti,tij,tj->t", nus, unpack(A), nus)
    qs = np.einsum("ti,tij,tj->t", nus, unpack(S), nus)
    upper = np.abs(qa) / (l2_5 * qs)
    bracket = np.sqrt(1.0 + (l2_2 / mass) ** 2)
    lower = qa / (mass / bracket ** 17 * qs)
    return upper, lower


def random_nonnegative_field(grid: VelocityGrid, rng=None, max_bumps: int = 3) -> np.ndarray:
    """Sum of up to ``max_bumps`` Maxwellian bumps with random weights, temperatures and centers."""
    rng = np.random.default_rng(rng)
    k = int(rng.integers(1, max_bumps + 1))
    out = np.zeros(grid.shape)
    for _ in range(k):
        q = rng.uniform(0.5, 3.0)
        center = rng.uniform(-1.5, 1.5, size=3)
        out += rng.uniform(0.2, 1.0) * maxwellian(q, grid, shift=tuple(center))
    return out


def verify_kernel_bounds(G, grid: VelocityGrid, trials: int = 200, rng=None,
                         upper_constant: float = 1.0, lower_constant: float = 1.0) -> BoundsReport:
    """Sample ``(v, nu)`` pairs and report both kernel-bound ratios.

    ``G`` may be a single field or a sequence of fields; each field is
    sampled ``trials`` times.  A violation is an upper ratio above
    ``upper_constant`` or a lower ratio below ``lower_constant``.
    """
    rng = np.random.default_rng(rng)
    fields = [G] if np.ndim(G) == 3 else list(G)
    if not fields:
        raise DomainError("no fields supplied")
    ups, lows = [], []
    for F in fields:
        if not np.any(np.asarray(F) > 0):
            raise DomainError("G must have positive mass")
        idx = rng.integers(0, grid.n, size=(trials, 3))
        nu = rng.normal(size=(trials, 3))
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        u, lo = kernel_bound_ratios(F, grid, idx, nu)
        ups.append(u)
        lows.append(lo)
    ups = np.concatenate(ups)
    lows = np.concatenate(lows)
    bad = int(np.sum(~np.isfinite(ups)) + np.sum(~np.isfinite(lows))
              + np.sum(ups > upper_constant) + np.sum(lows < lower_constant))
    return BoundsReport(
        upper_ratio_max=float(np.max(ups)),
        lower_ratio_min=float(np.min(lows)),
        upper_ratio_min=float(np.min(ups)),
        lower_ratio_max=float(np.max(lows)),
        trials=int(ups.size),
        grid=grid.to_dict(),
        violations=bad,
        upper_constant=upper_constant,
        lower_constant=lower_constant,
    )
