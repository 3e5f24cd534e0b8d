import numpy as np
import pytest
from hypothesis import settings

from vpl_limit.phase_grid import SpatialGrid, VelocityGrid

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def g8():
    return VelocityGrid(8, 6.0)


@pytest.fixture(scope="session")
def g12():
    return VelocityGrid(12, 6.0)


@pytest.fixture(scope="session")
def g16():
    return VelocityGrid(16, 6.0)


@pytest.fixture(scope="session")
def x8():
    return SpatialGrid(8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance results, filled by tests/test_acceptance.py and echoed at the end of the session
ACCEPTANCE = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}")
