import numpy as np
import pytest

from nhcell.cell_model import HamiltonianTriple, default_params
from nhcell.control_solver import solve_identity_seed


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def triple(params):
    return HamiltonianTriple.from_params(params)


@pytest.fixture(scope="session")
def tau(params):
    return params.tau


@pytest.fixture(scope="session")
def identity(triple, tau):
    return solve_identity_seed(triple, tau)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(rng, n=8, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(rng, n=8):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
