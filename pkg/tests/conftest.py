import numpy as np
import pytest

from splitdyn.problem import ProblemLibrary
from splitdyn.utils import sample_pairs


@pytest.fixture(scope="session")
def library():
    return ProblemLibrary()


@pytest.fixture
def pairs():
    def make(dim, count=500):
        return sample_pairs(dim, count, seed=7)

    return make


def _grid_prox(f, gamma, x, lo=-10.0, hi=10.0, points=200001):
    """Brute-force minimizer of f(y) + (y - x)^2 / (2 gamma) on a 1-d grid."""
    grid = np.linspace(lo, hi, points)
    return float(grid[np.argmin(f(grid) + (grid - x) ** 2 / (2.0 * gamma))])


@pytest.fixture
def grid_prox():
    return _grid_prox


def gamma_range(beta):
    """Five step sizes spread over (0, 2 beta), or over (0, 5] when B = 0."""
    upper = 5.0 if np.isinf(beta) else 2.0 * beta
    return [upper * f for f in (0.05, 0.25, 0.5, 0.75, 0.95)]


@pytest.fixture
def gammas():
    return gamma_range
