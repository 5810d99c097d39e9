"""
Pytest configuration and shared fixtures for test suite.
"""
import pytest
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.config import RANDOM_STATE
from src.filtered_groups import abelian_filtration, heisenberg_lcs
from src.gowers import Signal
from src.group_cube import FiniteAbelianGroup
from src.nilmanifold import periodic_abelian_poly, periodic_heisenberg_poly


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: exhaustive evaluator grids over many seeds")


@pytest.fixture(scope="session")
def z5():
    return FiniteAbelianGroup([5])


@pytest.fixture(scope="session")
def z2xz3():
    return FiniteAbelianGroup([2, 3])


@pytest.fixture
def rng():
    """Fresh seeded generator per test."""
    return np.random.default_rng(RANDOM_STATE)


@pytest.fixture
def random_signal():
    """Factory: seeded random signal on a group given by its spec string."""
    def _make(group_text, seed):
        return Signal.random(FiniteAbelianGroup.parse(group_text), seed)
    return _make


@pytest.fixture(scope="session")
def heis():
    return heisenberg_lcs()


@pytest.fixture(scope="session")
def quadratic_filtration():
    return abelian_filtration(1, 2)


@pytest.fixture
def periodic_poly(heis):
    """Factory: seeded p-periodic sequence on 'abelian' (degree <= 3) or 'heis'."""
    def _make(kind, p, seed, degree=2, m=1):
        if kind == "heis":
            return periodic_heisenberg_poly(heis, p, seed)
        return periodic_abelian_poly(abelian_filtration(m, degree), p, seed)
    return _make


@pytest.fixture
def frac():
    """Shorthand for building exact coordinate tuples."""
    def _make(*values):
        return tuple(Fraction(v) for v in values)
    return _make
