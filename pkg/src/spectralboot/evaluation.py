"""Frozen-embedding evaluation: linear probes, k-fold protocol, structural attacks.

Probes never touch encoder parameters; they see a fixed embedding matrix and
labels.  Attacks are poisoning-style graph edits applied before any training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .graphs import Graph


class ProtocolError(ValueError):
    pass


@dataclass
class ProbeResult:
    mean: float
    std: float
    values: np.ndarray
    protocol: str


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logreg(x: np.ndarray, y: np.ndarray, l2: float, tol: float = 1e-6,
                max_iter: int = 5000) -> Tuple[np.ndarray, np.ndarray]:
    """Full-batch gradient descent on the multinomial logistic loss.

    The step size comes from the loss Hessian bound (0.5 * spectral_norm(X)^2 / N
    plus the ridge term), so the iteration is stable without tuning; stops when
    the loss delta falls below ``tol``.
    """
    n, d = x.shape
    classes = np.unique(y)
    k = classes.size
    y_idx = np.searchsorted(classes, y)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y_idx] = 1.0
    w = np.zeros((d, k))
    b = np.zeros((1, k))
    sigma = np.linalg.norm(x, 2)
    lip = 0.5 * (sigma ** 2 + 1.0) / n + l2
    lr = 1.0 / lip
    prev = np.inf
    for _ in range(max_iter):
        probs = _softmax(x @ w + b)
        loss = -np.log(np.maximum(probs[np.arange(n), y_idx], 1e-300)).mean() \
            + 0.5 * l2 * float((w * w).sum())
        if abs(prev - loss) <= tol:
            break
        prev = loss
        resid = (probs - onehot) / n
        w = w - lr * (x.T @ resid + l2 * w)
        b = b - lr * resid.sum(axis=0, keepdims=True)
    return w, b


def _standardize(train: np.ndarray, other: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mu = train.mean(axis=0, keepdims=True)
    sd = train.std(axis=0, keepdims=True)
    sd = np.where(sd > 0, sd, 1.0)
    return (train - mu) / sd, (other - mu) / sd


def linear_probe(embeddings: np.ndarray, labels: np.ndarray,
                 split: Tuple[np.ndarray, np.ndarray], l2: float = 1e-3) -> ProbeResult:
    """Multinomial logistic probe on frozen embeddings; held-out accuracy."""
    train_idx, test_idx = (np.asarray(s, dtype=np.int64) for s in split)
    y_train = labels[train_idx]
    if np.unique(y_train).size < 2:
        raise ProtocolError("training split contains a single class")
    x_train, x_test = _standardize(embeddings[train_idx], embeddings[test_idx])
    w, b = _fit_logreg(x_train, y_train, l2)
    classes = np.unique(y_train)
    pred = classes[np.argmax(x_test @ w + b, axis=1)]
    acc = float((pred == labels[test_idx]).mean())
    return ProbeResult(acc, 0.0, np.array([acc]), "linear-probe")


def ridge_probe(embeddings: np.ndarray, targets: np.ndarray,
                split: Tuple[np.ndarray, np.ndarray], l2: float = 1e-6) -> ProbeResult:
    """Closed-form ridge regression on frozen embeddings; held-out R^2."""
    train_idx, test_idx = (np.asarray(s, dtype=np.int64) for s in split)
    x_train, x_test = embeddings[train_idx], embeddings[test_idx]
    y_train, y_test = targets[train_idx], targets[test_idx]
    mu_x = x_train.mean(axis=0, keepdims=True)
    mu_y = y_train.mean()
    xc = x_train - mu_x
    w = np.linalg.solve(xc.T @ xc + l2 * np.eye(xc.shape[1]), xc.T @ (y_train - mu_y))
    pred = (x_test - mu_x) @ w + mu_y
    ss_res = float(((y_test - pred) ** 2).sum())
    ss_tot = float(((y_test - y_test.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return ProbeResult(r2, 0.0, np.array([r2]), "ridge-probe")


def stratified_folds(labels: np.ndarray, k: int, rng: np.random.Generator) -> list:
    """Index sets of k folds with per-class round-robin assignment."""
    folds = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        for pos, node in enumerate(idx):
            folds[pos % k].append(int(node))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def kfold_eval(embeddings: np.ndarray, labels: np.ndarray, k: int = 10,
               repeats: int = 5, l2: float = 1e-3, seed: int = 0) -> ProbeResult:
    """Repeated stratified k-fold probe accuracy: mean of run means, std over runs."""
    if k < 2:
        raise ProtocolError("k must be >= 2")
    labels = np.asarray(labels)
    class_counts = np.bincount(labels - labels.min())
    if class_counts[class_counts > 0].min() < k:
        raise ProtocolError(
            f"smallest class has {class_counts[class_counts > 0].min()} members, "
            f"fewer than k={k} folds")
    run_means = []
    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        folds = stratified_folds(labels, k, rng)
        accs = []
        for i, test_idx in enumerate(folds):
            train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
            accs.append(linear_probe(embeddings, labels, (train_idx, test_idx), l2).mean)
        run_means.append(float(np.mean(accs)))
    values = np.asarray(run_means)
    return ProbeResult(float(values.mean()), float(values.std()), values, f"{k}-fold-x{repeats}")


def _all_pairs(n: int) -> int:
    return n * (n - 1) // 2


def _pair_from_rank(rank: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Map ranks in [0, C(n,2)) to (i, j) with i > j, row-major over the triangle."""
    i = np.floor((1 + np.sqrt(1 + 8 * rank.astype(np.float64))) / 2).astype(np.int64)
    # correct rare off-by-one from the float sqrt
    base = i * (i - 1) // 2
    too_big = rank < base
    i = i - too_big.astype(np.int64)
    base = i * (i - 1) // 2
    too_small = rank >= base + i
    i = i + too_small.astype(np.int64)
    base = i * (i - 1) // 2
    j = rank - base
    return i, j


def random_attack(g: Graph, sigma: float, seed: int = 0) -> Graph:
    """Flip round(sigma * |E|) uniformly chosen node pairs (edge <-> non-edge)."""
    if not 0.0 <= sigma <= 1.0:
        raise ProtocolError(f"sigma must be in [0,1], got {sigma}")
    budget = int(round(sigma * g.n_edges))
    if budget == 0:
        return Graph(g.n_nodes, g.edges.copy(), g.features, g.labels)
    rng = np.random.default_rng(seed)
    total = _all_pairs(g.n_nodes)
    ranks = rng.choice(total, size=min(budget, total), replace=False)
    i, j = _pair_from_rank(np.asarray(ranks, dtype=np.int64), g.n_nodes)
    edge_set = g.edge_set()
    for a, b in zip(i, j):
        pair = (int(b), int(a))  # canonical (min, max)
        if pair in edge_set:
            edge_set.remove(pair)
        else:
            edge_set.add(pair)
    return Graph(g.n_nodes, sorted(edge_set), g.features, g.labels)


def dice_attack(g: Graph, labels: np.ndarray, sigma: float, seed: int = 0) -> Graph:
    """Delete within-class edges and add cross-class non-edges, budget split evenly.

    If one category runs out of eligible pairs, the remaining budget moves to
    the other.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ProtocolError(f"sigma must be in [0,1], got {sigma}")
    labels = np.asarray(labels)
    budget = int(round(sigma * g.n_edges))
    if budget == 0:
        return Graph(g.n_nodes, g.edges.copy(), g.features, g.labels)
    rng = np.random.default_rng(seed)
    edge_set = g.edge_set()
    internal = [e for e in sorted(edge_set) if labels[e[0]] == labels[e[1]]]
    cross_nonedges = [
        (j, i)
        for i in range(g.n_nodes) for j in range(i)
        if labels[i] != labels[j] and (j, i) not in edge_set
    ]
    n_del = min(budget // 2, len(internal))
    n_add = min(budget - n_del, len(cross_nonedges))
    n_del = min(budget - n_add, len(internal))  # reflow leftover budget
    del_pick = rng.choice(len(internal), size=n_del, replace=False) if n_del else []
    add_pick = rng.choice(len(cross_nonedges), size=n_add, replace=False) if n_add else []
    for idx in del_pick:
        edge_set.remove(internal[int(idx)])
    for idx in add_pick:
        edge_set.add(cross_nonedges[int(idx)])
    return Graph(g.n_nodes, sorted(edge_set), g.features, g.labels)
