import numpy as np
import pytest

from freeboundary.grid import DiskGrid
from freeboundary.metric import CoordinateState, MetricData, metric_from_state
from freeboundary.suites import generator, quadratic_map

# PASS/FAIL lines collected by the acceptance module, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid():
    return DiskGrid(16, 32)


@pytest.fixture(scope="session")
def small_grid():
    return DiskGrid(12, 24)


@pytest.fixture(scope="session")
def flat(grid):
    return MetricData.flat(grid)


@pytest.fixture(scope="session")
def deformed(grid):
    """Metric of a small quadratic deformation with velocity and acceleration."""
    rng = generator(11)
    x = quadratic_map(rng, grid, 0.05)
    y1, y2 = grid.y
    V = 0.1 * np.array([y2 * y2, -y1 * y2])
    A = 0.05 * np.array([y1, y1 * y1 - y2])
    return metric_from_state(CoordinateState(grid, x, V, A))


def state_with(grid, x, V=None, A=None):
    z = np.zeros((2,) + grid.shape)
    return CoordinateState(grid, x, z if V is None else V, z.copy() if A is None else A)
