import numpy as np
import pytest

from pfbsdp.graphs import PatternGraph

# 7-vertex chordal pattern with cliques {1,5,7},{5,6,7},{4,6,7},{2,3,6}
EXAMPLE_EDGES = [
    (1, 5), (1, 7), (5, 7), (5, 6), (6, 7),
    (4, 6), (4, 7), (2, 3), (2, 6), (3, 6),
]


@pytest.fixture
def example_graph():
    return PatternGraph(7, EXAMPLE_EDGES)


def random_symmetric(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return (a + a.T) / 2.0


def random_pattern_matrix(rng, n, edges, diag=True):
    """Symmetric matrix supported on the given edge set (1-based)."""
    m = np.zeros((n, n))
    for i, j in edges:
        v = rng.standard_normal()
        m[i - 1, j - 1] = v
        m[j - 1, i - 1] = v
    if diag:
        m[np.diag_indices(n)] = rng.standard_normal(n)
    return m
