import numpy as np
import pytest

from hermcont import hopf_class1 as c1
from hermcont import hopf_round as hr
from hermcont import inoue
from hermcont.tensor_core import HermitianForm

# e^pi gives T = 2 pi, where 0.1 sin(2 pi t / T) is an admissible potential
ROUND_MODULUS = float(np.exp(np.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def round_params():
    return hr.HopfRoundParams(2, ROUND_MODULUS)


@pytest.fixture(scope="session")
def class1_params():
    return c1.HopfClass1Params(2.0, 4.0)


@pytest.fixture(scope="session")
def inoue_params():
    return inoue.validate_matrix(inoue.DEFAULT_MATRIX)


@pytest.fixture(scope="session")
def small_class1_grid(class1_params):
    return c1.Class1Grid(class1_params, 32, 33)


def random_hermitian(rng, n, positive=False):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    if positive:
        return HermitianForm(a @ a.conj().T + 0.1 * np.eye(n))
    return HermitianForm(0.5 * (a + a.conj().T))
