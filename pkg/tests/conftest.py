import numpy as np
import pytest

from calibgraph import lie
from calibgraph.lie import Pose


def random_pose(rng, max_angle=np.pi - 1e-3, box=1.0):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return Pose(lie.Rotation.from_rotvec(angle * axis), rng.uniform(-box, box, 3))


def hat4(xi):
    m = np.zeros((4, 4))
    m[:3, :3] = lie.hat(xi[3:])
    m[:3, 3] = xi[:3]
    return m


def expm_taylor(a, terms=60):
    """Matrix exponential by plain Taylor series (independent of lie.exp)."""
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# One summary line per acceptance criterion, printed after the run.
_acceptance = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
