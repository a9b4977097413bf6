import numpy as np
import pytest

from younglab import Grid, complete_triple, validate_triple


@pytest.fixture
def t_sym():
    return validate_triple(1.5, 1.5, 1.5)


@pytest.fixture
def t2():
    return complete_triple(2.0, 1.5)


@pytest.fixture
def grid1():
    return Grid.cube(-20.0, 20.0, 4096)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def smooth_bump(grid, rng, k=3):
    """Random positive mixture of Gaussians, decaying at the box edge."""
    x = grid.mesh()
    out = np.zeros(grid.shape)
    for _ in range(k):
        c = rng.uniform(-3, 3, size=grid.d)
        a = rng.uniform(0.3, 3.0)
        w = rng.uniform(0.2, 1.0)
        out += w * np.exp(-a * sum((xi - ci) ** 2 for xi, ci in zip(x, c)))
    return out
