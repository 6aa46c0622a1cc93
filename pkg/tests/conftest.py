"""Test configuration and fixtures."""

import math
from unittest.mock import MagicMock

import numpy as np
import pytest

from parity_bounds.domain.models import DensityState, ObservableFamily
from parity_bounds.domain.services import IFixtureRepository, IProblemRepository
from parity_bounds.infrastructure.fixtures import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    FixtureRepository,
    bell_state,
    chsh_family,
    pauli_site_family,
    tripartite_pauli_family,
)

IDENTITY = np.eye(2, dtype=np.complex128)


def random_contraction(rng: np.random.Generator, d: int) -> np.ndarray:
    """Hermitian matrix with operator norm in (0, 1]."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = g + g.conj().T
    scale = rng.uniform(0.2, 1.0)
    return scale * h / np.max(np.abs(np.linalg.eigvalsh(h)))


def random_density(rng: np.random.Generator, d: int) -> np.ndarray:
    """Full-rank density matrix from a Ginibre sample."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_family(rng: np.random.Generator, dims: tuple[int, ...], m: int) -> ObservableFamily:
    """Family with independent random contractions at every (term, site)."""
    return ObservableFamily.from_terms(
        dims, [[random_contraction(rng, d) for d in dims] for _ in range(m)]
    )


@pytest.fixture
def rng():
    """Seeded generator for reproducible random inputs."""
    return np.random.default_rng(20240611)


@pytest.fixture
def pauli():
    """Pauli matrices by name."""
    return {"I": IDENTITY, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


@pytest.fixture
def tripartite_family():
    """XYX + XYZ + ZZZ."""
    return tripartite_pauli_family()


@pytest.fixture
def chsh():
    """CHSH operator family."""
    return chsh_family()


@pytest.fixture
def phi_plus():
    """Bell state (|00> + |11>)/sqrt2."""
    return bell_state()


@pytest.fixture
def pauli_site_3():
    """XXX + YYY + ZZZ."""
    return pauli_site_family(3)


@pytest.fixture
def pauli_site_4():
    """XXXX + YYYY + ZZZZ."""
    return pauli_site_family(4)


@pytest.fixture
def zero_product_state():
    """|00> as a density state."""
    return DensityState.from_pure(np.array([1, 0, 0, 0]), (2, 2))


@pytest.fixture
def sqrt2():
    """sqrt(2)."""
    return math.sqrt(2)


@pytest.fixture
def make_contraction(rng):
    """Factory for random Hermitian contractions of a given dimension."""
    return lambda d: random_contraction(rng, d)


@pytest.fixture
def make_density(rng):
    """Factory for random full-rank density matrices of a given dimension."""
    return lambda d: random_density(rng, d)


@pytest.fixture
def make_family(rng):
    """Factory for random families with the given dims and number of terms."""
    return lambda dims, m: random_family(rng, tuple(dims), m)


@pytest.fixture
def fixture_repository():
    """Real fixture repository."""
    return FixtureRepository()


@pytest.fixture
def mock_fixture_repository():
    """Mock fixture repository."""
    return MagicMock(spec=IFixtureRepository)


@pytest.fixture
def mock_problem_repository():
    """Mock problem document repository."""
    return MagicMock(spec=IProblemRepository)
