import numpy as np
import pytest

from spectralboot.centrality import (
    CentralityParameterError,
    ConvergenceWarning,
    centrality_profile,
    combine_and_normalize,
    degree_centrality,
    katz_centrality,
    pagerank,
    search_centrality_weights,
    simplex_grid,
)
from spectralboot.graphs import Graph
from conftest import random_graph


def star(n_leaves=3):
    return Graph(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)],
                 np.zeros((n_leaves + 1, 1)))


def complete(n):
    return Graph(n, [(i, j) for i in range(n) for j in range(i)], np.zeros((n, 1)))


def test_degree_star():
    scores = degree_centrality(star(3))
    assert scores[0] == 1.0
    assert np.allclose(scores[1:], 1.0 / 3.0)


def test_degree_empty_graph():
    g = Graph(4, [], np.zeros((4, 1)))
    assert np.all(degree_centrality(g) == 0.0)


def test_degree_complete():
    assert np.allclose(degree_centrality(complete(3)), 1.0)


def test_pagerank_two_node_symmetry():
    g = Graph(2, [(0, 1)], np.zeros((2, 1)))
    assert np.allclose(pagerank(g), [0.5, 0.5], atol=1e-9)


def test_pagerank_single_node():
    g = Graph(1, [], np.zeros((1, 1)))
    assert np.allclose(pagerank(g), [1.0])


def test_pagerank_k4_symmetry():
    assert np.allclose(pagerank(complete(4)), 0.25, atol=1e-9)


def test_pagerank_sums_to_one_across_corpus():
    rng = np.random.default_rng(2)
    for trial in range(20):
        g = random_graph(rng, int(rng.integers(2, 50)), p=float(rng.uniform(0.05, 0.8)))
        assert abs(pagerank(g).sum() - 1.0) <= 1e-9


def test_pagerank_dangling_mass():
    # node 2 is isolated; scores must still sum to one and stay positive
    g = Graph(3, [(0, 1)], np.zeros((3, 1)))
    scores = pagerank(g)
    assert abs(scores.sum() - 1.0) <= 1e-9
    assert np.all(scores > 0)


def test_pagerank_validates_damping():
    with pytest.raises(CentralityParameterError):
        pagerank(complete(3), damping=1.5)


def test_pagerank_nonconvergence_warns():
    g = complete(6)
    with pytest.warns(ConvergenceWarning):
        pagerank(g, tol=1e-30, max_iter=2)


def test_katz_empty_graph_all_ones():
    g = Graph(3, [], np.zeros((3, 1)))
    assert np.allclose(katz_centrality(g, 0.3), 1.0)


def test_katz_k2_linear_solve_oracle():
    g = Graph(2, [(0, 1)], np.zeros((2, 1)))
    # oracle: solve (I - alpha A) x = 1 directly
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    expected = np.linalg.solve(np.eye(2) - 0.25 * a, np.ones(2))
    got = katz_centrality(g, 0.25)
    assert np.allclose(got, expected, atol=1e-9)
    assert np.allclose(got, 4.0 / 3.0, atol=1e-9)


def test_katz_k3_dense_solve_oracle():
    g = complete(3)
    a = np.ones((3, 3)) - np.eye(3)
    expected = np.linalg.solve(np.eye(3) - 0.2 * a, np.ones(3))
    got = katz_centrality(g, 0.2)
    assert np.allclose(got, expected, atol=1e-9)
    assert np.allclose(got, 5.0 / 3.0, atol=1e-9)


def test_katz_matches_dense_solve_on_random_graphs():
    rng = np.random.default_rng(7)
    for trial in range(10):
        g = random_graph(rng, int(rng.integers(4, 33)), p=0.3)
        from spectralboot.graphs import build_adjacency
        a = build_adjacency(g).to_dense()
        lam = np.max(np.abs(np.linalg.eigvalsh(a)))
        alpha = 0.5 / lam
        expected = np.linalg.solve(np.eye(g.n_nodes) - alpha * a, np.ones(g.n_nodes))
        assert np.abs(katz_centrality(g, alpha) - expected).max() <= 1e-6


def test_katz_rejects_divergent_alpha():
    g = complete(4)  # lambda_max = 3
    with pytest.raises(CentralityParameterError):
        katz_centrality(g, 0.5)


def test_combine_single_measure_minmax():
    out = combine_and_normalize(np.array([[0.0, 5.0, 10.0]]), np.array([1.0]))
    assert np.allclose(out, [0.0, 0.5, 1.0])


def test_combine_degenerate_all_equal():
    out = combine_and_normalize(np.array([[2.0, 2.0], [7.0, 7.0]]),
                                np.array([0.5, 0.5]))
    assert np.all(out == 0.5)


def test_combine_weighted_hand_arithmetic():
    scores = np.array([[1.0, 3.0], [9.0, 9.0]])
    out = combine_and_normalize(scores, np.array([2.0, 0.0]))
    assert np.allclose(out, [0.0, 1.0])


def test_combine_validates_weights():
    with pytest.raises(CentralityParameterError):
        combine_and_normalize(np.ones((2, 3)), np.array([0.0, 0.0]))
    with pytest.raises(CentralityParameterError):
        combine_and_normalize(np.ones((2, 3)), np.array([np.inf, 1.0]))
    with pytest.raises(CentralityParameterError):
        combine_and_normalize(np.ones((2, 3)), np.array([1.0]))


def test_combine_invariant_to_positive_affine_rescaling():
    rng = np.random.default_rng(4)
    scores = rng.random((3, 10))
    weights = np.array([0.2, 0.5, 0.3])
    base = combine_and_normalize(scores, weights)
    # positive affine transform of the combined vector leaves min-max output fixed
    scaled = combine_and_normalize(scores * 4.0, weights)
    assert np.allclose(base, scaled, atol=1e-12)
    shifted = scores.copy()
    shifted[1] += 11.0  # constant offset on one measure shifts combined by a constant
    assert np.allclose(base, combine_and_normalize(shifted, weights), atol=1e-12)


def test_profile_default_measures_and_range():
    rng = np.random.default_rng(6)
    g = random_graph(rng, 20, p=0.3)
    profile = centrality_profile(g)
    assert profile.measures == ("degree", "pagerank", "katz")
    assert profile.scores.shape == (3, 20)
    assert np.allclose(profile.weights, 1.0 / 3.0)
    assert profile.combined.min() == 0.0
    assert profile.combined.max() == 1.0


def test_simplex_grid_and_weight_search():
    grid = list(simplex_grid(3, step=0.5))
    assert all(abs(sum(w) - 1.0) < 1e-12 for w in grid)
    target = np.array([0.5, 0.5, 0.0])
    best, score = search_centrality_weights(
        lambda w: -float(np.abs(w - target).sum()), 3, step=0.5)
    assert np.allclose(best, target)
    assert score == 0.0
