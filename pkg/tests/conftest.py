import numpy as np
import pytest

from qbeckner import linalg as la
from qbeckner import semigroup as sg

SIGMA_STAR = np.diag([0.75, 0.25]).astype(complex)

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.diag([1.0, -1.0]).astype(complex),
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def depol_flat():
    """Depolarizing semigroup with the maximally mixed qubit state."""
    return sg.depolarizing(np.eye(2) / 2, 1.0)


@pytest.fixture(scope="session")
def depol_pauli():
    """Same generator, constructed from the three Pauli jumps."""
    jumps = [sg.JumpTerm(np.sqrt(1.0 / 8.0) * P, 0.0) for P in PAULI.values()]
    return sg.build_from_jumps(np.eye(2) / 2, jumps)


@pytest.fixture(scope="session")
def depol2():
    """Depolarizing semigroup with sigma* = diag(3/4, 1/4)."""
    return sg.depolarizing(SIGMA_STAR, 1.0)


@pytest.fixture(scope="session")
def dbc2():
    """Seeded primitive random detailed-balance model at d = 2."""
    return sg.random_dbc(SIGMA_STAR, 2, 1, seed=3)


@pytest.fixture(scope="session")
def dbc3():
    """Seeded primitive random detailed-balance model at d = 3."""
    sigma = np.diag([0.5, 0.3, 0.2]).astype(complex)
    return sg.random_dbc(sigma, 3, 1, seed=5)


def random_pd(rng, d, shift=0.5):
    """Random strictly positive Hermitian matrix."""
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return la.herm(G @ G.conj().T / d + shift * np.eye(d))
