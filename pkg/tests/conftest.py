import pytest

from wbiharmonic.grid import TGrid
from wbiharmonic.params import ProblemParams
from wbiharmonic.spectrum import SGrid

RESIDUAL_CASES = [(5, 1), (5, 0), (6, 0.5), (2, 1.5)]


@pytest.fixture(scope="session")
def tgrid():
    return TGrid()


@pytest.fixture(scope="session")
def sgrid():
    return SGrid()


@pytest.fixture(scope="session")
def p51():
    return ProblemParams(5, 1)


@pytest.fixture(scope="session")
def p50():
    return ProblemParams(5, 0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
