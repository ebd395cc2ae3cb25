import numpy as np
import pytest

from gaugelab import algebra
from gaugelab.connection import (Connection, TwistSpec,
                                 build_twisted_reference, trivial_reference)
from gaugelab.mesh import Cochain, GridSpec, hodge_weights


def sigma_grid(L=8, length=1.0):
    h = length / L
    return GridSpec((L, L), (h, h), ("Sigma", "Sigma"))


def product_grid(L=6, length=1.0):
    h = length / L
    return GridSpec((L, L, L, L), (h, h, h, h), ("S", "S", "Sigma", "Sigma"))


def random_cochain(grid, degree, rng, scale=1.0, n=2):
    c = Cochain.zeros(degree, grid, n)
    for axes in c.comps:
        c.comps[axes] = algebra.from_coords(
            rng.standard_normal(grid.dims + (3,)) * scale)
    return c


def flat_connection(grid, twist=False, epsilon=1.0):
    w = hodge_weights(grid, epsilon)
    if twist:
        ref = build_twisted_reference(TwistSpec(2, (((0, 1), 1),)), grid)
    else:
        ref = trivial_reference(grid)
    return Connection(ref, Cochain.zeros(1, grid, 2), w)


def random_connection(grid, rng, scale=0.05, twist=False, epsilon=1.0):
    c = flat_connection(grid, twist, epsilon)
    return c.with_deviation(random_cochain(grid, 1, rng, scale))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# One line per acceptance criterion, printed after the test summary so the
# pass/fail verdicts are visible regardless of output capturing.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
