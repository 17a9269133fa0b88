"""Sparse undirected graphs, adjacency construction, and the normalized Laplacian.

The normalized Laplacian convention used throughout is

    L = I - D^{-1/2} A D^{-1/2}

with D^{-1/2}_ii defined as 0 for isolated nodes, so L_ii = 1 everywhere and the
spectrum stays inside [0, 2].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np


class GraphStructureError(ValueError):
    """Raised when edge lists or matrix entries violate structural invariants."""


def canonical_edges(edges: Sequence[Tuple[int, int]], n_nodes: int) -> np.ndarray:
    """Validate, canonicalize to (min, max), deduplicate, and sort an edge list."""
    arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.min() < 0 or arr.max() >= n_nodes:
        raise GraphStructureError(
            f"edge endpoint out of range [0, {n_nodes}): "
            f"min={arr.min()}, max={arr.max()}"
        )
    if np.any(arr[:, 0] == arr[:, 1]):
        bad = arr[arr[:, 0] == arr[:, 1]][0]
        raise GraphStructureError(f"self-loop at node {bad[0]} is not allowed")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return canon


@dataclass(frozen=True)
class Graph:
    """Undirected graph with dense node features and optional class labels.

    Edges are stored canonically as (min, max) pairs, deduplicated and sorted,
    which makes iteration order deterministic across runs.
    """

    n_nodes: int
    edges: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "edges", canonical_edges(self.edges, self.n_nodes))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n_nodes:
            raise GraphStructureError(
                f"features must be (n_nodes, d), got {feats.shape} for n={self.n_nodes}"
            )
        object.__setattr__(self, "features", feats)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            object.__setattr__(self, "labels", labels)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.float64)
        if self.n_edges:
            np.add.at(deg, self.edges[:, 0], 1.0)
            np.add.at(deg, self.edges[:, 1], 1.0)
        return deg

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges}


@dataclass
class SparseSym:
    """Symmetric matrix in coordinate form, holding the lower triangle plus diagonal.

    Materialization mirrors the stored triangle, so the dense form equals its
    transpose bit-for-bit.  A dense cache backs matrix products at desk scale.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    _dense: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=np.float64)
        if not (self.rows.shape == self.cols.shape == self.vals.shape):
            raise GraphStructureError("rows/cols/vals must have matching shapes")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.n:
                raise GraphStructureError("row index out of range")
            if self.cols.min() < 0 or self.cols.max() >= self.n:
                raise GraphStructureError("col index out of range")
            if np.any(self.rows < self.cols):
                raise GraphStructureError("entries must satisfy row >= col (lower triangle)")

    @classmethod
    def from_dense(cls, m: np.ndarray) -> "SparseSym":
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GraphStructureError(f"expected square matrix, got {m.shape}")
        if not np.array_equal(m, m.T):
            raise GraphStructureError("matrix is not exactly symmetric")
        rows, cols = np.nonzero(np.tril(m))
        return cls(m.shape[0], rows, cols, m[rows, cols])

    @property
    def nnz(self) -> int:
        """Stored entry count (one triangle plus diagonal)."""
        return int(self.vals.size)

    def storage_bytes(self) -> int:
        return int(self.rows.nbytes + self.cols.nbytes + self.vals.nbytes)

    def to_dense(self) -> np.ndarray:
        if self._dense is None:
            m = np.zeros((self.n, self.n), dtype=np.float64)
            m[self.rows, self.cols] = self.vals
            off = self.rows != self.cols
            m[self.cols[off], self.rows[off]] = self.vals[off]
            self._dense = m
        return self._dense

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_dense() @ x

    def matmat(self, x: np.ndarray) -> np.ndarray:
        return self.to_dense() @ x


@dataclass
class NormalizedLaplacian:
    """I - D^{-1/2} A D^{-1/2} together with the D^{-1/2} diagonal it was built from.

    Augmented views reuse this container for modified operators whose spectrum may
    leave [0, 2]; the [0, 2] invariant is only asserted by tests on clean graphs.
    """

    matrix: SparseSym
    degree_root_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.n

    def to_dense(self) -> np.ndarray:
        return self.matrix.to_dense()

    def propagation_dense(self) -> np.ndarray:
        """Dense propagation operator I - L used by the encoders."""
        return np.eye(self.n) - self.to_dense()


def build_adjacency(g: Graph) -> SparseSym:
    """Binary symmetric adjacency with zero diagonal from a validated graph."""
    if g.n_edges == 0:
        return SparseSym(g.n_nodes, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    # canonical edges are (min, max); store as (max, min) to keep row >= col
    return SparseSym(g.n_nodes, g.edges[:, 1], g.edges[:, 0], np.ones(g.n_edges))


def normalized_laplacian(a: SparseSym) -> NormalizedLaplacian:
    """Normalized Laplacian of a binary, zero-diagonal adjacency.

    Isolated nodes get D^{-1/2}_ii = 0, leaving a unit diagonal entry and no
    off-diagonal coupling, so no graph mutation is needed.
    """
    dense = a.to_dense()
    if np.any(np.diag(dense) != 0.0):
        raise GraphStructureError("adjacency must have zero diagonal")
    deg = dense.sum(axis=1)
    with np.errstate(divide="ignore"):
        droot_inv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    a_norm = dense * droot_inv[:, None] * droot_inv[None, :]
    # build one triangle and mirror so the result is symmetric bit-for-bit
    lap = np.eye(a.n) - np.tril(a_norm)
    lap = np.tril(lap) + np.tril(lap, -1).T
    return NormalizedLaplacian(SparseSym.from_dense(lap), droot_inv)


def laplacian_from_graph(g: Graph) -> NormalizedLaplacian:
    return normalized_laplacian(build_adjacency(g))
