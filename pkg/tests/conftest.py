import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def dense_grid_1d(a=-1.0, b=1.0, n=8193):
    """Uniform grid including endpoints; 8193 steps hit all dyadics of
    level <= 12 exactly."""
    return np.linspace(a, b, n)


def grid_2d(a=-1.0, b=1.0, n=500):
    g = np.linspace(a, b, n)
    X, Y = np.meshgrid(g, g)
    return np.column_stack([X.ravel(), Y.ravel()])
