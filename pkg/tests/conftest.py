import numpy as np
import pytest
from hypothesis import settings

from cellhom.integrand import make_integrand
from cellhom.structure import build_euclidean, structure_from_config

settings.register_profile("cellhom", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("cellhom")

SQRT3 = float(np.sqrt(3.0))


@pytest.fixture(scope="session")
def euclid1():
    return build_euclidean(1)


@pytest.fixture(scope="session")
def euclid2():
    return build_euclidean(2)


@pytest.fixture(scope="session")
def lattice():
    return structure_from_config({"kind": "square_lattice"})


@pytest.fixture(scope="session")
def sine_coeff():
    return make_integrand("p_dirichlet_coeff", {"a0": 2.0, "a1": 1.0, "p": 2})


@pytest.fixture(scope="session")
def two_phase_1d():
    return make_integrand("laminate_2d", {"a1": 1.0, "a2": 3.0, "dim": 1})


@pytest.fixture(scope="session")
def laminate():
    return make_integrand("laminate_2d", {"a1": 1.0, "a2": 3.0})


@pytest.fixture(scope="session")
def double_well():
    return make_integrand("double_well_1d", {"p": 4})


@pytest.fixture(scope="session")
def dirichlet_1d():
    return make_integrand("p_dirichlet_coeff", {"a0": 1.0, "a1": 0.0, "p": 2})


@pytest.fixture(scope="session")
def dirichlet_2d():
    return make_integrand("p_dirichlet_coeff", {"a0": 1.0, "a1": 0.0, "p": 2, "dim": 2})


@pytest.fixture(scope="session")
def edge_quadratic():
    return make_integrand("graph_edge_quadratic", {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from helpers import ACCEPTANCE

    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
