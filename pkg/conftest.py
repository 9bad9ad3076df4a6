# conftest.py
# Shared pytest fixtures: import path, the slow marker, integral fixtures and orbital patterns.

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from fcidump import MolecularIntegrals, irrep_product, load_fcidump  # noqa: E402

# --- Constants ---
DATA_DIR = ROOT / "data"
H2_FCIDUMP = DATA_DIR / "h2_sto3g.fcidump"
H2_FCI_ENERGY = -1.1372658
H6_PATTERN = (0, 1, 0, 1, 0, 1)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full Lie closures and end-to-end runs")


def fixture_path(name):
    """Path of a data file, skipping the calling test when it is not shipped."""
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(f"integral fixture {name} not present in data/")
    return path


def random_integrals(orbital_irreps, n_electrons, ms2=0, seed=7):
    """Real integrals with full permutational and point-group symmetry."""
    rng = np.random.default_rng(seed)
    irreps = np.asarray(orbital_irreps, dtype=int)
    n = len(irreps)
    h1 = rng.normal(scale=0.3, size=(n, n))
    h1 = 0.5 * (h1 + h1.T) - np.diag(np.arange(n, 0, -1, dtype=float))
    h1[irreps[:, None] != irreps[None, :]] = 0.0

    h2 = rng.normal(scale=0.05, size=(n, n, n, n))
    h2 = h2 + h2.transpose(1, 0, 2, 3)
    h2 = h2 + h2.transpose(0, 1, 3, 2)
    h2 = h2 + h2.transpose(2, 3, 0, 1)
    for p, q, r, s in np.ndindex(n, n, n, n):
        if irrep_product(irreps[p], irreps[q], irreps[r], irreps[s]):
            h2[p, q, r, s] = 0.0
    # a diagonal Coulomb floor keeps the spectrum molecule-like
    for p in range(n):
        for q in range(n):
            h2[p, p, q, q] += 0.5
    return MolecularIntegrals(n, n_electrons, ms2, tuple(int(g) for g in irreps), h1, h2,
                              e_core=0.25)


# --- Fixtures ---

@pytest.fixture
def h2_path():
    return H2_FCIDUMP


@pytest.fixture
def h2():
    return load_fcidump(H2_FCIDUMP)


@pytest.fixture
def h6_pattern():
    return H6_PATTERN


@pytest.fixture
def c2v_integrals():
    """Four orbitals over two irreps, four electrons."""
    return random_integrals((0, 0, 1, 1), 4)


@pytest.fixture
def h6_integrals():
    """Random integrals on the alternating H6 irrep pattern."""
    return random_integrals(H6_PATTERN, 6, seed=11)
