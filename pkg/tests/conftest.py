import numpy as np
import pytest

from chaoscope.matrix import InteractionMatrix
from chaoscope.rng import stream
from chaoscope.verify import random_substochastic


@pytest.fixture
def gen():
    return stream(20250815)


def random_matrices(count, seed, n_lo=2, n_hi=8, columns=True):
    g = stream(seed)
    out = []
    for _ in range(count):
        n = int(g.integers(n_lo, n_hi + 1))
        out.append(random_substochastic(n, g, columns=columns))
    return out


@pytest.fixture
def single_edge():
    """Two particles, one symmetric edge of weight 0.7."""
    return InteractionMatrix.from_dense(np.array([[0.0, 0.7], [0.7, 0.0]]))


@pytest.fixture
def four_cycle():
    d = np.zeros((4, 4))
    for u, v in ((0, 1), (1, 2), (2, 3), (3, 0)):
        d[u, v] = d[v, u] = 0.5
    return InteractionMatrix.from_dense(d)
