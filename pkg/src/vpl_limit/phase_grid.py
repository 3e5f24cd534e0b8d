"""Velocity and spatial grids, Maxwellians and velocity moments.

Velocity grids are cell centred tensor grids on ``[-R, R]^3`` with an even
number of points per axis, so that no node sits at the origin.  Spatial grids
discretize the unit torus with uniformly spaced points.  Distribution values
are plain numpy arrays whose trailing three axes are velocity axes; an
optional leading axis indexes spatial cells.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "DomainError",
    "OverflowGuardError",
    "VelocityGrid",
    "SpatialGrid",
    "DistributionField",
    "default_extent",
    "maxwellian",
    "moments",
    "integrate",
    "weighted_l2",
    "polynomial",
    "gaussian",
    "x_derivative_norm",
]


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class OverflowGuardError(FloatingPointError):
    """Raised when a Gaussian weight cannot be resolved on the grid."""


def default_extent(*q_values: float) -> float:
    """Velocity truncation ``max(6, 6/sqrt(q_min))`` for the given temperatures."""
    q_min = min(q_values) if q_values else 1.0
    if q_min <= 0:
        raise DomainError("inverse temperatures must be positive")
    return max(6.0, 6.0 / np.sqrt(q_min))


@dataclass(frozen=True)
class VelocityGrid:
    """Cell centred tensor grid on ``[-extent, extent]^3``.

    Parameters
    ----------
    n_per_axis : int
        Points per axis, even and at least 8.
    extent : float
        Half width ``R`` of the velocity box.
    """

    n_per_axis: int
    extent: float = 6.0

    def __post_init__(self):
        n = int(self.n_per_axis)
        if n < 8 or n % 2:
            raise DomainError(f"n_per_axis must be even and >= 8, got {self.n_per_axis}")
        if not self.extent > 0:
            raise DomainError(f"extent must be positive, got {self.extent}")
        object.__setattr__(self, "n_per_axis", n)
        object.__setattr__(self, "extent", float(self.extent))

    @property
    def n(self) -> int:
        return self.n_per_axis

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n_per_axis

    @property
    def h(self) -> float:
        return self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n,) * 3

    @cached_property
    def nodes(self) -> np.ndarray:
        """1D node coordinates ``-R + (i + 1/2) h``."""
        n, h = self.n, self.spacing
        return -self.extent + (np.arange(n) + 0.5) * h

    @cached_property
    def faces(self) -> np.ndarray:
        """Interior face coordinates between consecutive nodes (length ``n - 1``)."""
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    @cached_property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays of shape ``(n,1,1)``, ``(1,n,1)``, ``(1,1,n)``."""
        v = self.nodes
        return (v[:, None, None], v[None, :, None], v[None, None, :])

    @cached_property
    def speed_squared(self) -> np.ndarray:
        vx, vy, vz = self.mesh
        return vx ** 2 + vy ** 2 + vz ** 2

    @cached_property
    def points(self) -> np.ndarray:
        """All nodes as an ``(n^3, 3)`` array in C order."""
        vx, vy, vz = np.meshgrid(self.nodes, self.nodes, self.nodes, indexing="ij")
        return np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)

    def velocity_component(self, axis: int) -> np.ndarray:
        return self.mesh[axis]

    def to_dict(self) -> dict:
        return {"n_per_axis": self.n, "extent": self.extent}


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform periodic grid on the torus of period ``length``."""

    n_cells: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n_cells) < 4:
            raise DomainError(f"n_cells must be >= 4, got {self.n_cells}")
        if not self.length > 0:
            raise DomainError("length must be positive")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells) * self.dx

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers ``2 pi k / length`` in numpy FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_cells, d=self.dx)

    def derivative(self, f: np.ndarray, axis: int = 0, order: int = 1) -> np.ndarray:
        """Spectral derivative along ``axis``; the Nyquist mode is dropped for odd orders."""
        k = self.wavenumbers.copy()
        if order % 2 and self.n_cells % 2 == 0:
            k[self.n_cells // 2] = 0.0
        shape = [1] * np.ndim(f)
        shape[axis] = self.n_cells
        mult = ((1j * k) ** order).reshape(shape)
        return np.real(np.fft.ifft(mult * np.fft.fft(f, axis=axis), axis=axis))

    def integrate(self, f: np.ndarray, axis: int = 0) -> np.ndarray:
        return np.sum(f, axis=axis) * self.dx

    def to_dict(self) -> dict:
        return {"n_cells": self.n_cells, "length": self.length}


@dataclass
class DistributionField:
    """A species' phase-space density on ``(x cells) x (velocity grid)``.

    ``values`` has shape ``(nx, n, n, n)`` when a spatial grid is attached and
    ``(n, n, n)`` otherwise.
    """

    species: str
    values: np.ndarray
    vgrid: VelocityGrid
    xgrid: Optional[SpatialGrid] = None
    signed: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.species not in ("ion", "electron"):
            raise DomainError(f"unknown species {self.species!r}")
        self.values = np.asarray(self.values, dtype=float)
        expected = self.vgrid.shape
        if self.xgrid is not None:
            expected = (self.xgrid.n_cells,) + expected
        if self.values.shape != expected:
            raise DomainError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("distribution values must be finite")
        if not self.signed and np.any(self.values < 0):
            raise DomainError("physical distributions must be nonnegative")

    def moments(self):
        return moments(self.values, self.vgrid)


def maxwellian(q: float, grid: VelocityGrid, shift=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Maxwellian ``(q / 2 pi)^{3/2} exp(-q |v - u|^2 / 2)`` at the grid nodes.

    Examples
    --------
    >>> g = VelocityGrid(24, 6.0)
    >>> round(float(integrate(maxwellian(1.0, g), g)), 8)
    1.0
    """
    if not q > 0:
        raise DomainError(f"inverse temperature must be positive, got {q}")
    vx, vy, vz = grid.mesh
    r2 = (vx - shift[0]) ** 2 + (vy - shift[1]) ** 2 + (vz - shift[2]) ** 2
    return (q / (2.0 * np.pi)) ** 1.5 * np.exp(-0.5 * q * r2)


def integrate(F: np.ndarray, grid: VelocityGrid) -> np.ndarray:
    """Midpoint rule over the trailing three velocity axes."""
    return np.sum(F, axis=(-3, -2, -1)) * grid.cell_volume


def moments(F: np.ndarray, grid: VelocityGrid):
    """Density, momentum and kinetic energy per spatial cell.

    Returns
    -------
    density : ndarray
    momentum : ndarray
        Trailing axis of length 3.
    kinetic_energy : ndarray
        ``int |v|^2/2 F dv``.
    """
    F = np.asarray(F, dtype=float)
    dv = grid.cell_volume
    v = grid.nodes
    density = np.sum(F, axis=(-3, -2, -1)) * dv
    mom = np.stack(
        [
            np.einsum("...ijk,i->...", F, v),
            np.einsum("...ijk,j->...", F, v),
            np.einsum("...ijk,k->...", F, v),
        ],
        axis=-1,
    ) * dv
    kin = 0.5 * np.sum(F * grid.speed_squared, axis=(-3, -2, -1)) * dv
    return density, mom, kin


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    param: float

    def __call__(self, grid: VelocityGrid) -> np.ndarray:
        r2 = grid.speed_squared
        if self.kind == "polynomial":
            return (1.0 + r2) ** (0.5 * self.param)
        # Gaussian weight e^{q|v|^2/4}; refuse weights that cannot be represented.
        expo = 0.25 * self.param * grid.extent ** 2 * 3.0
        if expo > 300.0:
            raise OverflowGuardError(
                f"gaussian weight q={self.param} overflows on extent {grid.extent}"
            )
        return np.exp(0.25 * self.param * r2)


def polynomial(m: float) -> WeightSpec:
    """Polynomial weight ``<v>^m``."""
    return WeightSpec("polynomial", float(m))


def gaussian(q: float) -> WeightSpec:
    """Gaussian weight ``exp(q |v|^2 / 4)``."""
    if not q > 0:
        raise DomainError("gaussian weight parameter must be positive")
    return WeightSpec("gaussian", float(q))


def _x_sum(values: np.ndarray, xgrid: Optional[SpatialGrid]) -> float:
    if values.ndim == 0:
        return float(values)
    dx = xgrid.dx if xgrid is not None else 1.0 / values.shape[0]
    return float(np.sum(values) * dx)


def weighted_l2(F: np.ndarray, weight: WeightSpec, grid: VelocityGrid,
                xgrid: Optional[SpatialGrid] = None) -> float:
    """Weighted L2 norm ``(int w^2 F^2)^{1/2}`` in velocity, integrated over x if present.

    A Gaussian weight ``exp(q|v|^2/4)`` paired with ``F`` decaying like
    ``exp(-q'|v|^2/2)`` is finite for ``q < 2 q'``.
    """
    w = weight(grid)
    F = np.asarray(F, dtype=float)
    per_cell = np.sum((w * F) ** 2, axis=(-3, -2, -1)) * grid.cell_volume
    if not np.all(np.isfinite(per_cell)):
        raise OverflowGuardError("weighted norm overflowed")
    return float(np.sqrt(_x_sum(per_cell, xgrid)))


def x_derivative_norm(F: np.ndarray, s: int, grid: VelocityGrid, xgrid: SpatialGrid,
                      weight: Optional[WeightSpec] = None) -> float:
    """Norm of ``<grad_x>^s F`` evaluated spectrally on the periodic grid."""
    if s < 0:
        raise DomainError("s must be nonnegative")
    F = np.asarray(F, dtype=float)
    w = weight(grid) if weight is not None else 1.0
    Fh = np.fft.fft(F * w, axis=0) / F.shape[0]
    mult = (1.0 + xgrid.wavenumbers ** 2) ** (0.5 * s)
    # Parseval on the torus: int |f|^2 dx = length * sum |f_k|^2
    power = np.sum(np.abs(Fh) ** 2, axis=(1, 2, 3)) * grid.cell_volume
    return float(np.sqrt(xgrid.length * np.sum(mult ** 2 * power)))
