import numpy as np
import pytest

from stokeselast.adjoint import Measurement, MeasurementSet
from stokeselast.fields import Grid2
from stokeselast.phantom import gaussian_inclusion, generate_phantom, shear_boundary_data
from stokeselast.stokes import StokesProblem, solve_stokes

OMEGA2 = 25.0
ACCEPTANCE_LINES = []


def make_data(n: int, modes=("shear-x",), omega2: float = OMEGA2):
    """Acceptance-style phantom (1 + Gaussian bump) and noiseless data on an n x n grid."""
    g = Grid2.unit_square(n)
    mu_true = generate_phantom(gaussian_inclusion(g, 1.0, 0.15))
    records = []
    for mode in modes:
        F = shear_boundary_data(g, mode)
        u = solve_stokes(StokesProblem(g, mu_true, omega2, F)).u
        records.append(Measurement(F, u, mode))
    return g, mu_true, MeasurementSet(records)


@pytest.fixture(scope="session")
def data16():
    return make_data(16)


@pytest.fixture(scope="session")
def data32():
    return make_data(32)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(ACCEPTANCE_LINES), key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
