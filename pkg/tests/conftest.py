import numpy as np
import pytest

from lagflow.geometry import GeometryState
from lagflow.grid import ParamGrid
from lagflow.scenarios import make_scenario


def state_for(name, size=64, scheme="spectral", **params):
    sc = make_scenario(name, params)
    grid = ParamGrid.uniform(sc.n, size, scheme)
    return sc, GeometryState(sc.sample(grid))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def graph_state():
    return state_for("lagrangian_graph")


@pytest.fixture(scope="session")
def torus_state():
    return state_for("product_torus", r=1.0, s=3.0)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
