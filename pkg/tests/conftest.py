import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from floq3 import IntegratorOptions, find_eigenvalues, from_fourier
from floq3.spectrum_scan import locate_ramifications


@pytest.fixture(scope="session")
def czero():
    return from_fourier()


@pytest.fixture(scope="session")
def cconst():
    # p identically 1
    return from_fourier([(0, 1.0)])


@pytest.fixture(scope="session")
def ccos():
    # p(t) = 2 cos(2 pi t)
    return from_fourier([(1, 1.0)])


@pytest.fixture(scope="session")
def cq():
    # q(t) = 2 cos(2 pi t)
    return from_fourier([], [(1, 1.0)])


@pytest.fixture(scope="session")
def cmix():
    # p and q both 2 cos(2 pi t)
    return from_fourier([(1, 1.0)], [(1, 1.0)])


@pytest.fixture(scope="session")
def cmulti():
    # two p modes and two q modes, mean-zero p
    return from_fourier([(1, 0.8), (2, 0.3 + 0.2j)], [(1, 0.5), (3, 0.25j)])


@pytest.fixture(scope="session")
def tight_opts():
    return IntegratorOptions(tolerance=1e-13)


# heavyweight shared computations, built once per session ---------------------

@pytest.fixture(scope="session")
def eigen_cache(czero, cconst, ccos):
    """Eigenvalue lists per (set name, kind) for |n| <= 12."""
    sets = {"zero": czero, "const": cconst, "cos": ccos}
    out = {}
    for name, c in sets.items():
        for kind in ("periodic", "antiperiodic"):
            out[name, kind] = find_eigenvalues(c, kind, (-12, 12))
    return out


@pytest.fixture(scope="session")
def ram_cache(czero, cconst, ccos):
    """Ramification records per set name (disk indices 1..8)."""
    return {
        "zero": locate_ramifications(czero, 8),
        "const": locate_ramifications(cconst, 8),
        "cos": locate_ramifications(ccos, 8),
    }
