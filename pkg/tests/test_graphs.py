import numpy as np
import pytest

from spectralboot.graphs import (
    Graph,
    GraphStructureError,
    SparseSym,
    build_adjacency,
    laplacian_from_graph,
    normalized_laplacian,
)
from conftest import random_graph


def test_triangle_adjacency(triangle):
    adj = build_adjacency(triangle).to_dense()
    assert adj.sum() == 6
    assert set(np.unique(adj)) == {0.0, 1.0}
    assert np.array_equal(adj, adj.T)
    assert np.all(np.diag(adj) == 0)


def test_empty_edges_zero_matrix():
    g = Graph(3, [], np.zeros((3, 1)))
    assert build_adjacency(g).to_dense().sum() == 0


def test_path_degrees(path3):
    assert np.array_equal(path3.degrees(), [1, 2, 1])


def test_edges_canonicalized_and_deduplicated():
    g = Graph(4, [(2, 1), (1, 2), (3, 0)], np.zeros((4, 1)))
    assert g.edges.tolist() == [[0, 3], [1, 2]]


def test_edge_out_of_range_rejected():
    with pytest.raises(GraphStructureError):
        Graph(3, [(0, 5)], np.zeros((3, 1)))


def test_self_loop_rejected():
    with pytest.raises(GraphStructureError):
        Graph(3, [(1, 1)], np.zeros((3, 1)))


def test_feature_shape_mismatch_rejected():
    with pytest.raises(GraphStructureError):
        Graph(3, [(0, 1)], np.zeros((2, 4)))


def test_k2_laplacian_eigenvalues(k2):
    lap = laplacian_from_graph(k2)
    vals = np.linalg.eigvalsh(lap.to_dense())
    assert np.allclose(vals, [0.0, 2.0], atol=1e-12)


def test_p3_laplacian_eigenvalues_dense_oracle(path3):
    lap = laplacian_from_graph(path3)
    vals = np.linalg.eigvalsh(lap.to_dense())
    assert np.allclose(vals, [0.0, 1.0, 2.0], atol=1e-12)


def test_isolated_node_unit_diagonal():
    g = Graph(3, [(0, 1)], np.zeros((3, 1)))
    lap = laplacian_from_graph(g).to_dense()
    assert lap[2, 2] == 1.0
    assert np.all(lap[2, :2] == 0.0) and np.all(lap[:2, 2] == 0.0)
    vals = np.linalg.eigvalsh(lap)
    assert np.allclose(sorted(vals), [0.0, 1.0, 2.0], atol=1e-12)


def test_laplacian_exactly_symmetric_bitwise():
    rng = np.random.default_rng(5)
    for trial in range(20):
        g = random_graph(rng, int(rng.integers(2, 40)))
        lap = laplacian_from_graph(g).to_dense()
        assert np.array_equal(lap, lap.T)


def test_spectrum_within_0_2():
    rng = np.random.default_rng(11)
    for trial in range(25):
        g = random_graph(rng, int(rng.integers(2, 65)), p=float(rng.uniform(0.05, 0.9)))
        vals = np.linalg.eigvalsh(laplacian_from_graph(g).to_dense())
        assert vals.min() >= -1e-8
        assert vals.max() <= 2.0 + 1e-8


def test_constant_vector_kernel_on_connected_graph():
    rng = np.random.default_rng(3)
    # path + chords keeps the graph connected
    n = 12
    edges = [(i, i + 1) for i in range(n - 1)]
    edges += [(i, j) for i in range(n) for j in range(i) if rng.random() < 0.2]
    g = Graph(n, edges, np.zeros((n, 1)))
    lap = laplacian_from_graph(g)
    v = np.sqrt(g.degrees())
    v /= np.linalg.norm(v)
    assert np.linalg.norm(lap.to_dense() @ v) <= 1e-8


def test_normalized_laplacian_requires_zero_diagonal():
    m = SparseSym.from_dense(np.eye(2))
    with pytest.raises(GraphStructureError):
        normalized_laplacian(m)


def test_sparsesym_round_trip_and_storage():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((8, 8))
    a = np.tril(a) + np.tril(a, -1).T
    m = SparseSym.from_dense(a)
    assert np.array_equal(m.to_dense(), a)
    assert m.storage_bytes() == m.nnz * (8 + 8 + 8)
    with pytest.raises(GraphStructureError):
        SparseSym.from_dense(rng.standard_normal((3, 3)))


def test_sparsesym_rejects_upper_triangle_entries():
    with pytest.raises(GraphStructureError):
        SparseSym(3, rows=[0], cols=[2], vals=[1.0])
