"""Pure numpy fallback for the compiled direct-summation kernels.

Signatures and outputs mirror :mod:`vpl_limit._kernels`.  Loops are
vectorized over sources and chunked over targets to bound memory.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


def _phi6(z: np.ndarray) -> np.ndarray:
    r2 = np.einsum("...i,...i->...", z, z)
    r = np.sqrt(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ir = 1.0 / r
        ir3 = ir / r2
        zx, zy, zz = z[..., 0], z[..., 1], z[..., 2]
        return np.stack(
            [ir - zx * zx * ir3, -zx * zy * ir3, -zx * zz * ir3,
             ir - zy * zy * ir3, -zy * zz * ir3, ir - zz * zz * ir3],
            axis=-1,
        )


def _contract(ph: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Symmetric six-entry matrices times vectors along the last axis."""
    return np.stack(
        [ph[..., 0] * u[..., 0] + ph[..., 1] * u[..., 1] + ph[..., 2] * u[..., 2],
         ph[..., 1] * u[..., 0] + ph[..., 3] * u[..., 1] + ph[..., 4] * u[..., 2],
         ph[..., 2] * u[..., 0] + ph[..., 4] * u[..., 1] + ph[..., 5] * u[..., 2]],
        axis=-1,
    )


def conv_phi_direct(G, nodes, h, origin_value):
    G = np.ascontiguousarray(G, dtype=float)
    n = G.shape[0]
    vx, vy, vz = np.meshgrid(nodes, nodes, nodes, indexing="ij")
    pts = np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)
    g = G.ravel()
    out = np.zeros((pts.shape[0], 6))
    for s in range(0, pts.shape[0], _CHUNK):
        t = pts[s:s + _CHUNK]
        z = t[:, None, :] - pts[None, :, :]
        ph = _phi6(z)
        ph[~np.isfinite(ph)] = 0.0
        out[s:s + _CHUNK] = np.einsum("tsm,s->tm", ph, g)
    diag = origin_value * g
    out[:, 0] += diag
    out[:, 3] += diag
    out[:, 5] += diag
    return (out * h ** 3).reshape(n, n, n, 6)


def phi_conv_points(targets, sources, weights, vec_weights, scale, cell, subdiv):
    targets = np.asarray(targets, dtype=float)
    src = scale * np.asarray(sources, dtype=float)
    weights = np.asarray(weights, dtype=float)
    vec_weights = np.asarray(vec_weights, dtype=float)
    A = np.zeros((targets.shape[0], 6))
    B = np.zeros((targets.shape[0], 3))
    near2 = (1.5 * cell) ** 2
    offs = ((np.arange(subdiv) + 0.5) / subdiv - 0.5) * cell
    ox, oy, oz = np.meshgrid(offs, offs, offs, indexing="ij")
    sub = np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)
    for s in range(0, targets.shape[0], _CHUNK):
        z = targets[s:s + _CHUNK, None, :] - src[None, :, :]
        ph = _phi6(z)
        if subdiv > 1:
            d2 = np.einsum("...i,...i->...", z, z)
            ti, si = np.nonzero(d2 < near2)
            if ti.size:
                zz = z[ti, si][:, None, :] - sub[None, :, :]
                ph[ti, si] = _phi6(zz).mean(axis=1)
        A[s:s + _CHUNK] = np.einsum("tsm,s->tm", ph, weights)
        B[s:s + _CHUNK] = _contract(ph, vec_weights[None, :, :]).sum(axis=1)
    return A, B


def landau_double_sum(pts, F, DF):
    pts = np.asarray(pts, dtype=float)
    F = np.asarray(F, dtype=float)
    DF = np.asarray(DF, dtype=float)
    W = np.zeros_like(DF)
    for s in range(0, pts.shape[0], _CHUNK):
        sl = slice(s, s + _CHUNK)
        z = pts[sl, None, :] - pts[None, :, :]
        ph = _phi6(z)
        ph[~np.isfinite(ph)] = 0.0
        u = F[None, :, None] * DF[sl, None, :] - F[sl, None, None] * DF[None, :, :]
        W[sl] = _contract(ph, u).sum(axis=1)
    return W


def entropy_double_sum(pts, F, g):
    pts = np.asarray(pts, dtype=float)
    F = np.asarray(F, dtype=float)
    g = np.asarray(g, dtype=float)
    S = np.zeros(pts.shape[0])
    for s in range(0, pts.shape[0], _CHUNK):
        sl = slice(s, s + _CHUNK)
        z = pts[sl, None, :] - pts[None, :, :]
        ph = _phi6(z)
        ph[~np.isfinite(ph)] = 0.0
        d = g[sl, None, :] - g[None, :, :]
        quad = np.einsum("tsk,tsk->ts", _contract(ph, d), d)
        S[sl] = F[sl] * (quad @ F)
    return S
