import numpy as np
import pytest

from finsler_nullity import metrics as M

ACCEPTANCE_LINES = []

SPHERE3_BASE = M.MetricSpec("riemannian_closed_form", 3, kind="sphere", radius=1.0, nested=True)


def randers3():
    return M.randers([0.2, 0.1, 0.0], [[0.1, 0.0, 0.05], [0.0, 0.1, 0.0], [0.02, 0.0, -0.1]], SPHERE3_BASE)


def randers2_flat():
    return M.randers([0.3, -0.2], [[0.1, 0.05], [0.0, -0.1]])


def battery_metrics():
    """The metric battery {euclidean, sphere, S²×ℝ, S²×ℝ², randers, minkowski_quartic}."""
    return {
        "euclidean": M.euclidean(3),
        "sphere": M.sphere(3, 1.0),
        "s2xr": M.sphere_times_flat(1),
        "s2xr2": M.sphere_times_flat(2),
        "randers": randers3(),
        "minkowski_quartic": M.minkowski_quartic(3, 0.7),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
