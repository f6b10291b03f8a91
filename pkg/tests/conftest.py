import numpy as np
import pytest

from stochac.mesh import build_mesh
from stochac.potential import PotentialSplit


@pytest.fixture
def split():
    return PotentialSplit()


@pytest.fixture
def mesh8():
    return build_mesh(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines collected by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
