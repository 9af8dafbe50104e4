"""
Shared pytest fixtures. Living at the repository root also puts the
top-level modules on sys.path for the tests/ package.
"""

import numpy as np
import pytest

from generate import gen_random
from model import GraphicalModel


def counterexample_model(unary_u=(4.0, 0.0), unary_v=(2.0, 0.0)):
    """Two nodes, two labels, the monotonicity counterexample costs"""
    return GraphicalModel(
        [2, 2],
        [(0, 1)],
        [list(unary_u), list(unary_v)],
        [[[0.0, 1.0], [7.0, 5.0]]],
    )


def zero_model(n=3, labels=2):
    """Chain with all-zero costs"""
    edges = [(u, u + 1) for u in range(n - 1)]
    return GraphicalModel(
        [labels] * n,
        edges,
        [np.zeros(labels) for _ in range(n)],
        [np.zeros((labels, labels)) for _ in edges],
    )


@pytest.fixture
def two_node_model():
    return counterexample_model()


@pytest.fixture
def fuzz_model():
    """Factory for small random models"""
    def make(seed, n=4, max_labels=3, density=1.0):
        return gen_random(n, max_labels, density, seed)
    return make
