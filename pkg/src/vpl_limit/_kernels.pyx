# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct-summation kernels for the Landau kernel.

All routines are O(N_target * N_source) loops that serve as oracles for the
FFT based convolutions and as the exactly conservative double-sum form of the
collision operator.  Symmetric 3x3 matrices are stored as the six entries
``(xx, xy, xz, yy, yz, zz)``.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _phi(double zx, double zy, double zz, double* out) noexcept nogil:
    cdef double r2 = zx * zx + zy * zy + zz * zz
    cdef double r = sqrt(r2)
    cdef double ir = 1.0 / r
    cdef double ir3 = ir / r2
    out[0] = ir - zx * zx * ir3
    out[1] = -zx * zy * ir3
    out[2] = -zx * zz * ir3
    out[3] = ir - zy * zy * ir3
    out[4] = -zy * zz * ir3
    out[5] = ir - zz * zz * ir3


def conv_phi_direct(double[:, :, ::1] G, double[::1] nodes, double h, double origin_value):
    """Direct linear convolution of the node table of Phi with ``G``.

    The table uses point values off the origin and ``origin_value * I`` at
    zero offset.  Returns an ``(n, n, n, 6)`` array scaled by ``h^3``.
    """
    cdef Py_ssize_t n = G.shape[0]
    cdef cnp.ndarray[double, ndim=4] res = np.zeros((n, n, n, 6))
    cdef double[:, :, :, ::1] out = res
    cdef Py_ssize_t i, j, k, a, b, c, m
    cdef double w, acc[6]
    cdef double ph[6]
    cdef double h3 = h * h * h
    for i in prange(n, nogil=True, schedule="static"):
        for j in range(n):
            for k in range(n):
                acc[0] = 0.0; acc[1] = 0.0; acc[2] = 0.0
                acc[3] = 0.0; acc[4] = 0.0; acc[5] = 0.0
                for a in range(n):
                    for b in range(n):
                        for c in range(n):
                            w = G[a, b, c]
                            if w == 0.0:
                                continue
                            if a == i and b == j and c == k:
                                acc[0] += origin_value * w
                                acc[3] += origin_value * w
                                acc[5] += origin_value * w
                                continue
                            _phi(nodes[i] - nodes[a], nodes[j] - nodes[b], nodes[k] - nodes[c], ph)
                            for m in range(6):
                                acc[m] += ph[m] * w
                for m in range(6):
                    out[i, j, k, m] = acc[m] * h3
    return res


def phi_conv_points(double[:, ::1] targets, double[:, ::1] sources, double[::1] weights,
                    double[:, ::1] vec_weights, double scale, double cell, int subdiv):
    """Sum ``Phi(t - scale * s)`` against scalar and vector source weights.

    Parameters
    ----------
    targets : (M, 3)
    sources : (N, 3)
    weights : (N,)
        Scalar weights (already multiplied by the source cell volume).
    vec_weights : (N, 3)
        Vector weights for the second output.
    scale : float
        Multiplier applied to the source coordinates.
    cell : float
        Edge of a scaled source cell, ``scale * h``.  Pairs closer than
        ``1.5 * cell`` are evaluated as an ``subdiv^3`` sub-cell average.

    Returns
    -------
    A : (M, 6) ndarray
    B : (M, 3) ndarray
    """
    cdef Py_ssize_t M = targets.shape[0], N = sources.shape[0]
    cdef cnp.ndarray[double, ndim=2] Ares = np.zeros((M, 6))
    cdef cnp.ndarray[double, ndim=2] Bres = np.zeros((M, 3))
    cdef double[:, ::1] A = Ares
    cdef double[:, ::1] B = Bres
    cdef Py_ssize_t t, s, m, p, q, r
    cdef double zx, zy, zz, d2, w, ox, oy, oz, inv
    cdef double ph[6]
    cdef double avg[6]
    cdef double near2 = (1.5 * cell) * (1.5 * cell)
    inv = 1.0 / (subdiv * subdiv * subdiv)
    for t in prange(M, nogil=True, schedule="static"):
        for s in range(N):
            zx = targets[t, 0] - scale * sources[s, 0]
            zy = targets[t, 1] - scale * sources[s, 1]
            zz = targets[t, 2] - scale * sources[s, 2]
            d2 = zx * zx + zy * zy + zz * zz
            if d2 < near2 and subdiv > 1:
                for m in range(6):
                    avg[m] = 0.0
                for p in range(subdiv):
                    ox = ((p + 0.5) / subdiv - 0.5) * cell
                    for q in range(subdiv):
                        oy = ((q + 0.5) / subdiv - 0.5) * cell
                        for r in range(subdiv):
                            oz = ((r + 0.5) / subdiv - 0.5) * cell
                            _phi(zx - ox, zy - oy, zz - oz, ph)
                            for m in range(6):
                                avg[m] += ph[m]
                for m in range(6):
                    ph[m] = avg[m] * inv
            else:
                _phi(zx, zy, zz, ph)
            w = weights[s]
            for m in range(6):
                A[t, m] += ph[m] * w
            B[t, 0] += ph[0] * vec_weights[s, 0] + ph[1] * vec_weights[s, 1] + ph[2] * vec_weights[s, 2]
            B[t, 1] += ph[1] * vec_weights[s, 0] + ph[3] * vec_weights[s, 1] + ph[4] * vec_weights[s, 2]
            B[t, 2] += ph[2] * vec_weights[s, 0] + ph[4] * vec_weights[s, 1] + ph[5] * vec_weights[s, 2]
    return Ares, Bres


def landau_double_sum(double[:, ::1] pts, double[::1] F, double[:, ::1] DF):
    """Antisymmetric Landau flux ``W_i = sum_j Phi(v_i - v_j)(F_j DF_i - F_i DF_j)``.

    The caller multiplies by the cell volume.  The bracket vanishes for
    ``i == j`` so the singular diagonal never contributes.
    """
    cdef Py_ssize_t N = pts.shape[0]
    cdef cnp.ndarray[double, ndim=2] res = np.zeros((N, 3))
    cdef double[:, ::1] W = res
    cdef Py_ssize_t i, j
    cdef double ux, uy, uz, w0, w1, w2
    cdef double ph[6]
    for i in prange(N, nogil=True, schedule="static"):
        w0 = 0.0; w1 = 0.0; w2 = 0.0
        for j in range(N):
            if j == i:
                continue
            _phi(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1], pts[i, 2] - pts[j, 2], ph)
            ux = F[j] * DF[i, 0] - F[i] * DF[j, 0]
            uy = F[j] * DF[i, 1] - F[i] * DF[j, 1]
            uz = F[j] * DF[i, 2] - F[i] * DF[j, 2]
            w0 = w0 + ph[0] * ux + ph[1] * uy + ph[2] * uz
            w1 = w1 + ph[1] * ux + ph[3] * uy + ph[4] * uz
            w2 = w2 + ph[2] * ux + ph[4] * uy + ph[5] * uz
        W[i, 0] = w0
        W[i, 1] = w1
        W[i, 2] = w2
    return res


def entropy_double_sum(double[:, ::1] pts, double[::1] F, double[:, ::1] g):
    """Per-node partial sums of ``F_i F_j (g_i - g_j)^T Phi_ij (g_i - g_j)``.

    Returns an ``(N,)`` array; summing it in a fixed order keeps the result
    independent of the thread count.
    """
    cdef Py_ssize_t N = pts.shape[0]
    cdef cnp.ndarray[double, ndim=1] res = np.zeros(N)
    cdef double[::1] S = res
    cdef Py_ssize_t i, j
    cdef double dx, dy, dz, acc
    cdef double ph[6]
    for i in prange(N, nogil=True, schedule="static"):
        acc = 0.0
        for j in range(N):
            if j == i:
                continue
            _phi(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1], pts[i, 2] - pts[j, 2], ph)
            dx = g[i, 0] - g[j, 0]
            dy = g[i, 1] - g[j, 1]
            dz = g[i, 2] - g[j, 2]
            acc = acc + F[j] * (ph[0] * dx * dx + ph[3] * dy * dy + ph[5] * dz * dz
                                + 2.0 * (ph[1] * dx * dy + ph[2] * dx * dz + ph[4] * dy * dz))
        S[i] = acc * F[i]
    return res
