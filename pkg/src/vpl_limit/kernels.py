"""Backend selection for the direct-summation kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is substituted.  Setting ``VPL_LIMIT_BACKEND=python`` forces the
fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

__all__ = ["BACKEND", "conv_phi_direct", "phi_conv_points", "landau_double_sum",
           "entropy_double_sum", "get_backend"]

_impl = _kernels_py
BACKEND = "python"

if os.environ.get("VPL_LIMIT_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (``"cython"``, ``"python"`` or the active one)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def conv_phi_direct(G, nodes, h, origin_value):
    return _impl.conv_phi_direct(_c(G), _c(nodes), float(h), float(origin_value))


def phi_conv_points(targets, sources, weights, vec_weights, scale, cell, subdiv=1):
    return _impl.phi_conv_points(_c(targets), _c(sources), _c(weights), _c(vec_weights),
                                 float(scale), float(cell), int(subdiv))


def landau_double_sum(pts, F, DF):
    return _impl.landau_double_sum(_c(pts), _c(F), _c(DF))


def entropy_double_sum(pts, F, g):
    return _impl.entropy_double_sum(_c(pts), _c(F), _c(g))
