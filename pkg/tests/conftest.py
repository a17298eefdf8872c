import math

import pytest

from fractal_kpp.flees import ModelParams, solve_flees
from fractal_kpp.fractal_set import build_prefractal

CANTOR = math.log(2.0) / math.log(3.0)
PAPER_ALPHAS = tuple(math.log(2.0) / math.log(q) for q in (4.0, 3.0, 2.5, 2.2, 2.07)) + (1.0,)


@pytest.fixture(scope="session")
def example_params():
    return ModelParams.example()


@pytest.fixture(scope="session")
def trajectories(example_params):
    """Strict-closure trajectories for every alpha of the sweep, solved once."""
    return {a: solve_flees(example_params, build_prefractal(a, 5)) for a in PAPER_ALPHAS}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
