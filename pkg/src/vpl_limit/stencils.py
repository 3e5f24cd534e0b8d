"""Fourth-order finite difference operators on cell centred velocity axes.

Every operator is a dense ``(m, n)`` matrix acting along one axis of a field.
Near the truncation boundary the centred stencils are replaced by one-sided
stencils of the same order, so node derivatives are exact on quartics and face operators on cubics.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "node_derivative",
    "face_value",
    "face_derivative",
    "central_derivative2",
    "apply_along",
]


@lru_cache(maxsize=None)
def _node_derivative(n: int) -> np.ndarray:
    D = np.zeros((n, n))
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = [1.0, -8.0, 0.0, 8.0, -1.0]
    D[0, :5] = [-25.0, 48.0, -36.0, 16.0, -3.0]
    D[1, :5] = [-3.0, -10.0, 18.0, -6.0, 1.0]
    D[n - 1, n - 5:] = -D[0, :5][::-1]
    D[n - 2, n - 5:] = -D[1, :5][::-1]
    D /= 12.0
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def _face_value(n: int) -> np.ndarray:
    P = np.zeros((n - 1, n))
    for i in range(1, n - 2):
        P[i, i - 1:i + 3] = [-1.0, 9.0, 9.0, -1.0]
    P[0, :4] = [5.0, 15.0, -5.0, 1.0]
    P[n - 2, n - 4:] = P[0, :4][::-1]
    P /= 16.0
    P.setflags(write=False)
    return P


@lru_cache(maxsize=None)
def _face_derivative(n: int) -> np.ndarray:
    D = np.zeros((n - 1, n))
    for i in range(1, n - 2):
        D[i, i - 1:i + 3] = [1.0, -27.0, 27.0, -1.0]
    D[0, :4] = [-23.0, 21.0, 3.0, -1.0]
    D[n - 2, n - 4:] = -D[0, :4][::-1]
    D /= 24.0
    D.setflags(write=False)
    return D


@lru_cache(maxsize=None)
def _central2(n: int) -> np.ndarray:
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5
        D[i, i + 1] = 0.5
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[n - 1, n - 3:] = [0.5, -2.0, 1.5]
    D.setflags(write=False)
    return D


def node_derivative(n: int, h: float) -> np.ndarray:
    """First derivative at nodes, fourth order."""
    return _node_derivative(n) / h


def face_value(n: int) -> np.ndarray:
    """Interpolation from ``n`` nodes to the ``n - 1`` interior faces."""
    return _face_value(n)


def face_derivative(n: int, h: float) -> np.ndarray:
    """First derivative at the ``n - 1`` interior faces, fourth order."""
    return _face_derivative(n) / h


def central_derivative2(n: int, h: float) -> np.ndarray:
    """Second-order central differences with one-sided boundary rows."""
    return _central2(n) / h


def apply_along(M: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    """Apply the matrix ``M`` along ``axis`` of ``f``."""
    f = np.moveaxis(f, axis, -1)
    out = f @ M.T
    return np.moveaxis(out, -1, axis)
