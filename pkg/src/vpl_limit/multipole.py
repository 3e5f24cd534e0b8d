"""Far-field expansion of kernel convolutions.

Since ``Phi_ij(z) = d_i d_j |z|``, a convolution ``(Phi * G)(y)`` with ``G``
concentrated near the origin expands as

    sum_alpha (-1)^|alpha| / alpha! * M_alpha * d^(alpha + e_i + e_j) |y|,

where ``M_alpha`` are the moments of ``G``.  Derivatives of ``|y|`` are
generated by exact term recursion once and cached.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np

__all__ = ["multi_indices", "distance_derivatives", "moments_multi", "Multipole"]


def multi_indices(order: int):
    """All 3D multi-indices with total degree at most ``order``, graded."""
    out = []
    for total in range(order + 1):
        for a in range(total + 1):
            for b in range(total - a + 1):
                out.append((a, b, total - a - b))
    return out


def _diff_terms(terms: dict, axis: int) -> dict:
    """Differentiate ``sum c x^a y^b z^c r^p`` along one axis (``r = |y|``)."""
    out: dict = {}
    for (mono, p), c in terms.items():
        k = mono[axis]
        if k:
            m = list(mono)
            m[axis] -= 1
            key = (tuple(m), p)
            out[key] = out.get(key, 0) + c * k
        if p:
            m = list(mono)
            m[axis] += 1
            key = (tuple(m), p - 2)
            out[key] = out.get(key, 0) + c * p
    return {k: v for k, v in out.items() if v != 0}


@lru_cache(maxsize=4)
def distance_derivatives(order: int):
    """Evaluator of every ``d^beta |y|`` with ``|beta| <= order``.

    Each derivative is kept as an exact sum of terms ``c x^a y^b z^c r^p``
    built by repeated differentiation.

    Returns
    -------
    index : dict
        Maps each multi-index to its position in the output.
    fn : callable
        ``fn(x, y, z)`` returns a list of arrays.
    """
    betas = multi_indices(order)
    table = {(0, 0, 0): {((0, 0, 0), 1): 1}}
    for beta in betas:
        if beta in table:
            continue
        ax = next(i for i in range(3) if beta[i] > 0)
        parent = tuple(b - (i == ax) for i, b in enumerate(beta))
        table[beta] = _diff_terms(table[parent], ax)
    compiled = []
    for beta in betas:
        terms = table[beta]
        compiled.append((np.array([m for (m, _p) in terms], dtype=int).reshape(-1, 3),
                         np.array([p for (_m, p) in terms], dtype=int),
                         np.array([float(c) for c in terms.values()])))
    max_pow = order + 1

    def fn(x, y, z):
        x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
        r = np.sqrt(x * x + y * y + z * z)
        px = [np.ones_like(x)]
        py = [np.ones_like(y)]
        pz = [np.ones_like(z)]
        for _ in range(max_pow):
            px.append(px[-1] * x)
            py.append(py[-1] * y)
            pz.append(pz[-1] * z)
        rp = {}
        out = []
        for monos, pows, coefs in compiled:
            acc = np.zeros_like(r)
            for (a, b, c), p, k in zip(monos, pows, coefs):
                if p not in rp:
                    rp[p] = r ** float(p)
                acc = acc + k * px[a] * py[b] * pz[c] * rp[p]
            out.append(acc)
        return out

    return {b: i for i, b in enumerate(betas)}, fn


def moments_multi(G: np.ndarray, nodes: np.ndarray, cell_volume: float, order: int) -> dict:
    """Moments ``int v^alpha G dv`` for ``|alpha| <= order`` (midpoint rule)."""
    powers = [nodes ** k for k in range(order + 1)]
    out = {}
    for a in multi_indices(order):
        out[a] = float(np.einsum("ijk,i,j,k->", G, powers[a[0]], powers[a[1]], powers[a[2]])) * cell_volume
    return out


_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


class Multipole:
    """Far-field evaluator of ``Phi * G`` and ``Phi * DG`` for compact sources.

    Parameters
    ----------
    G : ndarray (n, n, n)
    DG : ndarray (3, n, n, n)
        Velocity gradient of ``G`` (any consistent discretization).
    nodes, cell_volume
        Source grid description.
    order : int
        Highest moment order retained.
    """

    def __init__(self, G, DG, nodes, cell_volume, order: int = 4):
        self.order = order
        self.index, self.fn = distance_derivatives(order + 2)
        self.alphas = multi_indices(order)
        self.m0 = moments_multi(G, nodes, cell_volume, order)
        self.m1 = [moments_multi(DG[j], nodes, cell_volume, order) for j in range(3)]
        self.coef = {a: (-1) ** sum(a) / (factorial(a[0]) * factorial(a[1]) * factorial(a[2]))
                     for a in self.alphas}

    def __call__(self, points: np.ndarray):
        p = np.asarray(points, dtype=float)
        derivs = self.fn(p[..., 0], p[..., 1], p[..., 2])
        derivs = [np.broadcast_to(d, p.shape[:-1]) for d in derivs]

        def d(beta):
            return derivs[self.index[beta]]

        A = np.zeros(p.shape[:-1] + (6,))
        B = np.zeros(p.shape[:-1] + (3,))
        full = np.zeros((3, 3) + p.shape[:-1])
        for a in self.alphas:
            c = self.coef[a]
            for i, j in product(range(3), range(3)):
                if i > j:
                    continue
                beta = (a[0] + (i == 0) + (j == 0), a[1] + (i == 1) + (j == 1), a[2] + (i == 2) + (j == 2))
                full[i, j] = c * d(beta)
                full[j, i] = full[i, j]
            for m, (i, j) in enumerate(_PAIRS):
                A[..., m] += full[i, j] * self.m0[a]
            for i in range(3):
                B[..., i] += sum(full[i, j] * self.m1[j][a] for j in range(3))
        return A, B
