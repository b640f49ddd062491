import numpy as np
import pytest

from nsac.eos import PhysParams
from nsac.grid import BCMode, Grid

#: Lines emitted by test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def params():
    return PhysParams(nu=0.1, eps=0.05, theta=0.9, rho_ref=0.1)


@pytest.fixture
def periodic_grid():
    return Grid(1.0, 64)


@pytest.fixture
def mixed_grid():
    return Grid(1.0, 64, BCMode.MIXED)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
