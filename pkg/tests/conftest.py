import numpy as np
import pytest

from fglht.data import build_factorial_design, reference_beta
from fglht.model import FunctionalDataset
from fglht.simulation import NoiseCase, gen_subject_effects, simulation_grid


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def design():
    return build_factorial_design()


@pytest.fixture
def case1_data(design):
    """Case 1 curves (rho = 0.5) around a weak signal."""
    grid = simulation_grid()
    v = gen_subject_effects(NoiseCase("case1", 0.5), design.n, grid, np.random.default_rng(11))
    beta = reference_beta()
    return FunctionalDataset(grid, design.x @ (0.1 * beta.beta_hat) + v.values)
