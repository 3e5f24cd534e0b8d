import os
import subprocess
import sys

import numpy as np
import pytest

from vpl_limit import kernels
from vpl_limit.phase_grid import VelocityGrid, maxwellian

G8 = VelocityGrid(8, 6.0)


def _state():
    F = maxwellian(1.0, G8, (0.5, 0.0, 0.0)) + 0.4 * maxwellian(2.0, G8, (-0.5, 0.3, 0.0))
    DF = np.stack(np.gradient(F, G8.h), axis=-1).reshape(-1, 3)
    return F.ravel(), DF


@pytest.fixture(scope="module")
def backends():
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        pytest.skip("compiled extension not built")
    return kernels.get_backend("python"), cy


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


class TestBackends:
    def test_unknown(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")

    def test_active_is_known(self):
        assert kernels.BACKEND in ("cython", "python")

    def test_double_sum_agrees(self, backends):
        py, cy = backends
        F, DF = _state()
        assert _rel(cy.landau_double_sum(G8.points, F, DF), py.landau_double_sum(G8.points, F, DF)) < 1e-12

    def test_entropy_sum_agrees(self, backends):
        py, cy = backends
        F, DF = _state()
        g = DF / F[:, None]
        assert _rel(cy.entropy_double_sum(G8.points, F, g), py.entropy_double_sum(G8.points, F, g)) < 1e-12

    def test_conv_direct_agrees(self, backends):
        py, cy = backends
        F, _ = _state()
        G = F.reshape(G8.shape)
        a = cy.conv_phi_direct(G, G8.nodes, G8.h, 0.0)
        b = py.conv_phi_direct(G, G8.nodes, G8.h, 0.0)
        assert _rel(a, b) < 1e-12

    def test_points_agree(self, backends, rng):
        py, cy = backends
        F, DF = _state()
        tgt = rng.uniform(-8, 8, (5, 3))
        args = (tgt, G8.points, F, DF, 1.0, G8.h, 2)
        for x, y in zip(cy.phi_conv_points(*args), py.phi_conv_points(*args)):
            assert _rel(np.asarray(x), np.asarray(y)) < 1e-12


def test_env_forces_python_fallback():
    env = dict(os.environ, VPL_LIMIT_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from vpl_limit import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
