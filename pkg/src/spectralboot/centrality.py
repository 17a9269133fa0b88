"""Node centrality measures and their weighted combination.

The combined score is a weighted sum of per-measure scores, min-max normalized
to [0, 1]; it seeds the augmentation probabilities so that pairs of structurally
important nodes start with the highest perturbation mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from .graphs import Graph, build_adjacency


class ConvergenceWarning(UserWarning):
    """Emitted when an iterative solver returns without meeting its tolerance."""


class CentralityParameterError(ValueError):
    pass


def degree_centrality(g: Graph) -> np.ndarray:
    """deg(i) / max(1, n - 1)."""
    return g.degrees() / max(1, g.n_nodes - 1)


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 200) -> np.ndarray:
    """Power iteration PageRank on the undirected graph.

    Dangling (degree-zero) nodes spread their mass uniformly.  The result sums
    to 1; if the L1 residual is still above ``tol`` after ``max_iter`` sweeps a
    ConvergenceWarning is emitted and the current iterate is returned.
    """
    if not 0.0 < damping < 1.0:
        raise CentralityParameterError(f"damping must be in (0,1), got {damping}")
    if tol <= 0:
        raise CentralityParameterError("tol must be positive")
    n = g.n_nodes
    if n == 0:
        return np.zeros(0)
    adj = build_adjacency(g).to_dense()
    deg = adj.sum(axis=1)
    dangling = deg == 0
    with np.errstate(divide="ignore"):
        inv_deg = np.where(dangling, 0.0, 1.0 / np.maximum(deg, 1e-300))
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        spread = adj.T @ (x * inv_deg)
        dangling_mass = x[dangling].sum()
        x_new = damping * (spread + dangling_mass / n) + (1.0 - damping) / n
        resid = np.abs(x_new - x).sum()
        x = x_new
        if resid <= tol:
            break
    else:
        warnings.warn(
            f"pagerank did not reach tol={tol} after {max_iter} iterations "
            f"(residual {resid:.3e})",
            ConvergenceWarning,
        )
    return x / x.sum()


def adjacency_spectral_radius(g: Graph, iters: int = 200) -> float:
    """Power-iteration estimate of the adjacency spectral radius."""
    n = g.n_nodes
    if n == 0 or g.n_edges == 0:
        return 0.0
    adj = build_adjacency(g).to_dense()
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(iters):
        w = adj @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (adj @ v))
    return lam


def katz_centrality(g: Graph, alpha: float, tol: float = 1e-12,
                    max_iter: int = 1000) -> np.ndarray:
    """Fixed-point solve of x = alpha * A x + 1.

    Requires alpha < 1/lambda_max(A) for the Neumann series to converge; the
    spectral radius is estimated by power iteration and violations raise.
    """
    lam = adjacency_spectral_radius(g)
    if lam > 0 and alpha >= 1.0 / lam:
        raise CentralityParameterError(
            f"alpha={alpha} must be < 1/lambda_max ~ {1.0 / lam:.6g} for convergence"
        )
    n = g.n_nodes
    adj = build_adjacency(g).to_dense() if n else np.zeros((0, 0))
    x = np.ones(n)
    for _ in range(max_iter):
        x_new = alpha * (adj @ x) + 1.0
        resid = np.abs(x_new - x).max() if n else 0.0
        x = x_new
        if resid <= tol:
            break
    else:
        warnings.warn(
            f"katz_centrality did not reach tol={tol} after {max_iter} iterations",
            ConvergenceWarning,
        )
    return x


def combine_and_normalize(scores: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum of per-measure score rows, min-max normalized to [0, 1].

    An all-equal combined vector maps to constant 0.5 instead of dividing by a
    zero range.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if scores.shape[0] != weights.size:
        raise CentralityParameterError(
            f"{weights.size} weights for {scores.shape[0]} score rows"
        )
    if not np.all(np.isfinite(weights)):
        raise CentralityParameterError("weights must be finite")
    if not np.any(weights != 0):
        raise CentralityParameterError("at least one weight must be nonzero")
    combined = weights @ scores
    lo, hi = combined.min(), combined.max()
    if hi - lo == 0.0:
        return np.full(combined.shape, 0.5)
    return (combined - lo) / (hi - lo)


DEFAULT_MEASURES: Tuple[str, ...] = ("degree", "pagerank", "katz")


@dataclass(frozen=True)
class CentralityProfile:
    """Raw per-measure scores, mixing weights, and the normalized combination."""

    measures: Tuple[str, ...]
    scores: np.ndarray      # (K_measures, n_nodes)
    weights: np.ndarray     # (K_measures,)
    combined: np.ndarray    # (n_nodes,) in [0, 1]


def compute_measure(g: Graph, name: str, *, damping: float = 0.85,
                    katz_alpha: Optional[float] = None) -> np.ndarray:
    if name == "degree":
        return degree_centrality(g)
    if name == "pagerank":
        return pagerank(g, damping=damping)
    if name == "katz":
        if katz_alpha is None:
            lam = adjacency_spectral_radius(g)
            katz_alpha = 0.9 / lam if lam > 0 else 0.1
        return katz_centrality(g, katz_alpha)
    raise CentralityParameterError(f"unknown centrality measure '{name}'")


def centrality_profile(g: Graph, measures: Sequence[str] = DEFAULT_MEASURES,
                       weights: Optional[Sequence[float]] = None,
                       **measure_kwargs) -> CentralityProfile:
    """Evaluate the configured measures and combine them (uniform weights by default)."""
    measures = tuple(measures)
    if not measures:
        raise CentralityParameterError("need at least one centrality measure")
    rows = [compute_measure(g, m, **measure_kwargs) for m in measures]
    scores = np.stack(rows, axis=0)
    w = (np.full(len(measures), 1.0 / len(measures)) if weights is None
         else np.asarray(weights, dtype=np.float64))
    combined = combine_and_normalize(scores, w)
    return CentralityProfile(measures, scores, w, combined)


def simplex_grid(k: int, step: float = 0.25) -> Iterable[Tuple[float, ...]]:
    """Weight vectors on the k-simplex with coordinates in multiples of ``step``."""
    levels = int(round(1.0 / step))
    for combo in product(range(levels + 1), repeat=k):
        if sum(combo) == levels:
            yield tuple(c * step for c in combo)


def search_centrality_weights(evaluate: Callable[[np.ndarray], float], k: int,
                              step: float = 0.25) -> Tuple[np.ndarray, float]:
    """Grid search over simplex weight mixes, keeping the highest-scoring one.

    ``evaluate`` maps a weight vector to a downstream score (e.g. probe
    accuracy from a short training run).  Off by default in the pipeline; the
    mixing weights are plain configuration otherwise.
    """
    best_w, best_score = None, -np.inf
    for w in simplex_grid(k, step):
        w_arr = np.asarray(w)
        if not np.any(w_arr != 0):
            continue
        score = float(evaluate(w_arr))
        if score > best_score:
            best_w, best_score = w_arr, score
    return best_w, best_score
