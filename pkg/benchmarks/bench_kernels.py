"""Compare the compiled and numpy kernel backends on identical inputs.

Usage: python benchmarks/bench_kernels.py [--sizes 8 10 12] [--repeat 3]
"""

import argparse
import time

import numpy as np

from vpl_limit.kernels import get_backend
from vpl_limit.phase_grid import VelocityGrid, maxwellian


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(n):
    grid = VelocityGrid(n, 5.0)
    rng = np.random.default_rng(0)
    # two bumps so the Landau flux does not cancel as it would on a Maxwellian
    G = maxwellian(1.0, grid) + 0.5 * maxwellian(2.0, grid, shift=(1.0, 0.0, 0.0))
    pts = grid.points
    F = G.ravel()
    DF = np.stack(np.gradient(G, grid.h), axis=-1).reshape(-1, 3)
    g = DF / F[:, None]
    targets = rng.uniform(-3, 3, size=(256, 3))
    return {
        "conv_phi_direct": lambda k: k.conv_phi_direct(G, grid.nodes, grid.h, 0.0),
        "phi_conv_points": lambda k: k.phi_conv_points(targets, pts, F * grid.cell_volume,
                                                       DF * grid.cell_volume, 1.0, grid.h, 2),
        "landau_double_sum": lambda k: k.landau_double_sum(pts, F, DF),
        "entropy_double_sum": lambda k: k.entropy_double_sum(pts, F, g),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 10, 12])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled backend unavailable; build with `pip install -e . --no-build-isolation`")
        return 1
    py = get_backend("python")
    print(f"{'kernel':<20} {'n':>3} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max rel diff':>13}")
    for n in args.sizes:
        for name, call in _cases(n).items():
            tp, op = _best(lambda: call(py), args.repeat)
            tc, oc = _best(lambda: call(cy), args.repeat)
            op = np.concatenate([np.ravel(a) for a in (op if isinstance(op, tuple) else (op,))])
            oc = np.concatenate([np.ravel(a) for a in (oc if isinstance(oc, tuple) else (oc,))])
            diff = np.max(np.abs(op - oc)) / max(np.max(np.abs(op)), 1e-300)
            print(f"{name:<20} {n:>3} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.1f} {diff:>13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
