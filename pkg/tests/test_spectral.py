import numpy as np
import pytest

from spectralboot.graphs import SparseSym, laplacian_from_graph
from spectralboot.spectral import (
    SpectralShapeError,
    SpectralSummary,
    build_modified_laplacian,
    degenerate_clusters,
    extremal_eigs,
    spectral_loss,
    spectral_loss_grad,
    spectral_norm_objective,
)
from conftest import random_graph


def random_sym(rng, n):
    a = rng.standard_normal((n, n))
    a = (a + a.T) / 2
    return SparseSym.from_dense(np.tril(a) + np.tril(a, -1).T)


def dense_extremal(dense, k):
    vals = np.linalg.eigvalsh(dense)
    return np.concatenate([vals[:k], vals[-k:]])


def test_diagonal_matrix_extremes():
    m = SparseSym.from_dense(np.diag([1.0, 2.0, 3.0, 4.0]))
    s = extremal_eigs(m, 1)
    assert np.allclose(s.eigenvalues, [1.0, 4.0], atol=1e-10)


def test_p3_laplacian_extremes(path3):
    lap = laplacian_from_graph(path3)
    s = extremal_eigs(lap.matrix, 1)
    assert np.allclose(s.eigenvalues, [0.0, 2.0], atol=1e-10)


def test_k2_laplacian_extremes(k2):
    lap = laplacian_from_graph(k2)
    s = extremal_eigs(lap.matrix, 1)
    assert np.allclose(s.eigenvalues, [0.0, 2.0], atol=1e-10)


def test_extremal_matches_dense_on_random_matrices():
    rng = np.random.default_rng(0)
    for trial in range(25):
        n = int(rng.integers(12, 65))
        m = random_sym(rng, n)
        for k in (1, 2, 5):
            if 2 * k > n:
                continue
            s = extremal_eigs(m, k, seed=trial)
            assert np.abs(s.eigenvalues - dense_extremal(m.to_dense(), k)).max() <= 1e-8


def test_summary_invariants_residual_and_orthonormality():
    rng = np.random.default_rng(1)
    m = random_sym(rng, 40)
    s = extremal_eigs(m, 3, tol=1e-10)
    assert np.all(s.residuals(m) <= 1e-10 * np.maximum(1.0, np.abs(s.eigenvalues)))
    gram = s.eigenvectors.T @ s.eigenvectors
    assert np.abs(gram - np.eye(6)).max() <= 1e-6


def test_dense_fallback_when_2k_equals_n():
    rng = np.random.default_rng(2)
    m = random_sym(rng, 8)
    info = {}
    s = extremal_eigs(m, 4, info=info)
    assert info["dense"]
    assert np.allclose(s.eigenvalues, np.linalg.eigvalsh(m.to_dense()), atol=1e-12)


def test_k_out_of_range_rejected():
    rng = np.random.default_rng(3)
    m = random_sym(rng, 6)
    with pytest.raises(SpectralShapeError):
        extremal_eigs(m, 4)
    with pytest.raises(SpectralShapeError):
        extremal_eigs(m, 0)


def test_spectral_loss_identical_zero():
    s = SpectralSummary(np.array([0.0, 2.0]), np.eye(2))
    assert spectral_loss(s, s, 1) == 0.0
    assert spectral_loss(s, s, -1) == 0.0


def test_spectral_loss_hand_arithmetic():
    orig = SpectralSummary(np.array([0.0, 2.0]), np.eye(2))
    mod = SpectralSummary(np.array([0.5, 1.5]), np.eye(2))
    assert spectral_loss(orig, mod, 1) == pytest.approx(0.25)
    assert spectral_loss(orig, mod, -1) == pytest.approx(-0.25)


def test_spectral_loss_shape_error():
    a = SpectralSummary(np.array([0.0, 2.0]), np.eye(2))
    b = SpectralSummary(np.array([0.0, 1.0, 1.5, 2.0]), np.eye(4))
    with pytest.raises(SpectralShapeError):
        spectral_loss(a, b)


def test_norm_objective():
    mod = SpectralSummary(np.array([1.0, 2.0]), np.eye(2))
    assert spectral_norm_objective(mod, 1) == pytest.approx(5.0)


def test_build_modified_identity_cases(path3):
    lap = laplacian_from_graph(path3)
    n = 3
    assert np.array_equal(build_modified_laplacian(lap, np.ones(n), np.zeros((n, n))).to_dense(),
                          lap.to_dense())
    delta = np.zeros((n, n)); delta[2, 0] = 0.7
    assert np.array_equal(build_modified_laplacian(lap, np.zeros(n), delta).to_dense(),
                          lap.to_dense())


def test_build_modified_p3_dense_product_oracle(path3):
    lap = laplacian_from_graph(path3)
    delta = np.zeros((3, 3)); delta[2, 0] = 1.0
    c = np.ones(3)
    ld = lap.to_dense()
    delta_sym = delta + delta.T
    raw = ld + ld @ (np.diag(c) @ delta_sym @ np.diag(c))
    expected = 0.5 * (raw + raw.T)
    got = build_modified_laplacian(lap, c, delta).to_dense()
    assert np.allclose(got, expected, atol=1e-14)
    assert np.array_equal(got, got.T)


def test_modified_laplacian_exactly_symmetric():
    rng = np.random.default_rng(8)
    for trial in range(10):
        g = random_graph(rng, 12, p=0.4)
        lap = laplacian_from_graph(g)
        delta = np.tril(rng.random((12, 12)), -1)
        c = rng.random(12)
        out = build_modified_laplacian(lap, c, delta).to_dense()
        assert np.array_equal(out, out.T)


def dense_loss(lap, c, delta, k, orig_ref):
    """Independent oracle: dense eigendecomposition of the modified operator."""
    md = build_modified_laplacian(lap, c, delta).to_dense()
    vals = np.linalg.eigvalsh(md)
    mod = np.concatenate([vals[:k], vals[-k:]])
    d = mod - orig_ref
    return float(d @ d) / d.size


def test_grad_zero_at_zero_perturbation(path3):
    lap = laplacian_from_graph(path3)
    orig = extremal_eigs(lap.matrix, 1)
    grad = spectral_loss_grad(lap, np.zeros(3), np.zeros((3, 3)), orig, orig)
    assert np.all(grad == 0.0)


def test_grad_two_node_finite_difference(k2):
    lap = laplacian_from_graph(k2)
    c = np.ones(2)
    delta = np.zeros((2, 2)); delta[1, 0] = 0.3
    k = 1
    orig = extremal_eigs(lap.matrix, k)
    orig_ref = np.sort(np.linalg.eigvalsh(lap.to_dense()))
    mod = extremal_eigs(build_modified_laplacian(lap, c, delta), k)
    grad = spectral_loss_grad(lap, c, delta, mod, orig)
    h = 1e-6
    dp = delta.copy(); dp[1, 0] += h
    dm = delta.copy(); dm[1, 0] -= h
    fd = (dense_loss(lap, c, dp, k, orig_ref) - dense_loss(lap, c, dm, k, orig_ref)) / (2 * h)
    assert abs(grad[1, 0] - fd) / max(abs(fd), 1e-8) <= 1e-5


def test_grad_random_graphs_finite_difference():
    rng = np.random.default_rng(12)
    checked = 0
    attempts = 0
    while checked < 20 and attempts < 80:
        attempts += 1
        n = int(rng.integers(5, 9))
        g = random_graph(rng, n, p=0.5)
        lap = laplacian_from_graph(g)
        c = rng.random(n)
        delta = np.tril(rng.random((n, n)), -1) * 0.4
        k = 2 if n >= 4 else 1
        orig = extremal_eigs(lap.matrix, k, seed=attempts)
        dvals = np.linalg.eigvalsh(lap.to_dense())
        orig_ref = np.concatenate([dvals[:k], dvals[-k:]])
        mod = extremal_eigs(build_modified_laplacian(lap, c, delta), k, seed=attempts)
        if degenerate_clusters(mod.eigenvalues):
            continue
        grad = spectral_loss_grad(lap, c, delta, mod, orig)
        h = 1e-6
        for _ in range(4):
            i = int(rng.integers(1, n)); j = int(rng.integers(0, i))
            dp = delta.copy(); dp[i, j] += h
            dm = delta.copy(); dm[i, j] -= h
            fd = (dense_loss(lap, c, dp, k, orig_ref)
                  - dense_loss(lap, c, dm, k, orig_ref)) / (2 * h)
            rel = abs(grad[i, j] - fd) / max(abs(fd), abs(grad[i, j]), 1e-8)
            assert rel <= 1e-4
        checked += 1
    assert checked == 20


def test_degenerate_cluster_detection_and_diagnostics(k2):
    clusters = degenerate_clusters(np.array([1.0, 1.0 + 1e-12, 3.0]))
    assert clusters == [[0, 1]]
    assert degenerate_clusters(np.array([1.0, 2.0, 3.0])) == []
    # diagnostics flag propagates through the gradient call
    lap = laplacian_from_graph(k2)
    vecs = np.eye(2)
    mod = SpectralSummary(np.array([1.0, 1.0 + 1e-12]), vecs)
    orig = SpectralSummary(np.array([0.0, 2.0]), vecs)
    diag = {}
    spectral_loss_grad(lap, np.ones(2), np.zeros((2, 2)), mod, orig, diagnostics=diag)
    assert diag["degenerate_clusters"] == [[0, 1]]


def test_grad_respects_support_mask(path3):
    lap = laplacian_from_graph(path3)
    c = np.full(3, 0.8)
    delta = np.tril(np.full((3, 3), 0.2), -1)
    k = 1
    orig = extremal_eigs(lap.matrix, k)
    mod = extremal_eigs(build_modified_laplacian(lap, c, delta), k)
    support = np.zeros((3, 3), dtype=bool)
    support[2, 0] = True
    grad = spectral_loss_grad(lap, c, delta, mod, orig, support=support)
    assert grad[1, 0] == 0.0 and grad[2, 1] == 0.0
