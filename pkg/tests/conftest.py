import numpy as np
import pytest

from sieveode import model as M

LV_THETA = (1.0, 1.0, 1.0, 1.0)
LV_XI = (1.0, 2.0)
HO_THETA = (1.0, 1.0)
HO_XI = (1.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def truth_on_grid(model, theta, xi, T, N=2001, refine=10):
    """Simulated trajectory plus its values on a uniform N-point grid."""
    fine = np.linspace(0.0, T, (N - 1) * refine + 1)
    traj = M.simulate(model, theta, xi, fine)
    grid = np.linspace(0.0, T, N)
    return traj, grid, traj.at(grid)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
