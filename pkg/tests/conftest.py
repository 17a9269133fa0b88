import numpy as np
import pytest

from spectralboot.graphs import Graph


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)], np.zeros((3, 2)))


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)], np.zeros((3, 2)))


@pytest.fixture
def k2():
    return Graph(2, [(0, 1)], np.zeros((2, 2)))


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4,
                 d_feat: int = 2) -> Graph:
    edges = [(i, j) for i in range(n) for j in range(i) if rng.random() < p]
    if not edges:
        edges = [(1, 0)]
    return Graph(n, edges, rng.standard_normal((n, d_feat)))
