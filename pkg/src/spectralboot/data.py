"""Dataset loading, synthetic graph generation, and text serialization.

Formats are deliberately plain: edges as two integer columns, features as
header-free CSV, labels as one integer per line, splits as bracketed named
sections.  '#' starts a comment anywhere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .graphs import Graph, GraphStructureError


class DatasetFormatError(ValueError):
    pass


@dataclass
class DatasetBundle:
    graphs: List[Graph]
    task: str  # "node-classification" or "graph-classification"
    splits: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("node-classification", "graph-classification"):
            raise DatasetFormatError(f"unknown task '{self.task}'")
        universe = (self.graphs[0].n_nodes if self.task == "node-classification"
                    else len(self.graphs))
        seen: set = set()
        for name, idx in self.splits.items():
            idx = np.asarray(idx, dtype=np.int64)
            self.splits[name] = idx
            if idx.size and (idx.min() < 0 or idx.max() >= universe):
                raise DatasetFormatError(f"split '{name}' index out of range")
            overlap = seen.intersection(idx.tolist())
            if overlap:
                raise DatasetFormatError(f"split '{name}' overlaps earlier splits: {sorted(overlap)[:5]}")
            seen.update(idx.tolist())

    @property
    def graph(self) -> Graph:
        if len(self.graphs) != 1:
            raise DatasetFormatError("bundle holds multiple graphs")
        return self.graphs[0]


def _data_lines(path) -> List[tuple]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                out.append((lineno, line))
    return out


def _parse_edges(path) -> np.ndarray:
    rows = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}:{lineno}: expected two columns, got {line!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def _parse_features(path) -> np.ndarray:
    rows = []
    width = None
    for lineno, line in _data_lines(path):
        try:
            vals = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise DatasetFormatError(
                f"{path}:{lineno}: row has {len(vals)} values, expected {width}")
        rows.append(vals)
    if not rows:
        raise DatasetFormatError(f"{path}: no feature rows")
    return np.asarray(rows, dtype=np.float64)


def _parse_labels(path) -> np.ndarray:
    vals = []
    for lineno, line in _data_lines(path):
        try:
            vals.append(int(line))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return np.asarray(vals, dtype=np.int64)


def _parse_splits(path) -> Dict[str, np.ndarray]:
    sections: Dict[str, List[int]] = {}
    current: Optional[str] = None
    for lineno, line in _data_lines(path):
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections.setdefault(current, [])
        elif current is None:
            raise DatasetFormatError(f"{path}:{lineno}: index data before any [section]")
        else:
            try:
                sections[current].extend(int(v) for v in line.split())
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
    return {k: np.asarray(v, dtype=np.int64) for k, v in sections.items()}


def load_edgelist(path_edges, path_features, path_labels=None, path_splits=None,
                  task: str = "node-classification") -> DatasetBundle:
    """Load one graph from the text formats into a validated bundle."""
    features = _parse_features(path_features)
    n = features.shape[0]
    raw_edges = _parse_edges(path_edges)
    if raw_edges.size:
        lo = np.minimum(raw_edges[:, 0], raw_edges[:, 1])
        hi = np.maximum(raw_edges[:, 0], raw_edges[:, 1])
        uniq = np.unique(np.stack([lo, hi], axis=1), axis=0)
        if uniq.shape[0] < raw_edges.shape[0]:
            warnings.warn(
                f"{path_edges}: {raw_edges.shape[0] - uniq.shape[0]} duplicate "
                "edge line(s) removed", UserWarning)
    labels = None
    if path_labels is not None and Path(path_labels).exists():
        labels = _parse_labels(path_labels)
        if labels.size != n:
            raise DatasetFormatError(
                f"{path_labels}: {labels.size} labels for {n} feature rows")
    elif task == "node-classification":
        raise DatasetFormatError("node-classification task requires a labels file")
    try:
        graph = Graph(n, raw_edges, features, labels)
    except GraphStructureError as exc:
        raise DatasetFormatError(f"{path_edges}: {exc}") from exc
    splits = _parse_splits(path_splits) if path_splits else {}
    return DatasetBundle([graph], task, splits)


def save_bundle(bundle: DatasetBundle, directory) -> Dict[str, Path]:
    """Write the single-graph bundle back to the text formats (repr floats)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    g = bundle.graph
    paths = {
        "edges": directory / "edges.txt",
        "features": directory / "features.csv",
        "labels": directory / "labels.txt",
        "splits": directory / "splits.txt",
    }
    with open(paths["edges"], "w", encoding="utf-8") as fh:
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")
    with open(paths["features"], "w", encoding="utf-8") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if g.labels is not None:
        with open(paths["labels"], "w", encoding="utf-8") as fh:
            for v in g.labels:
                fh.write(f"{int(v)}\n")
    else:
        paths.pop("labels")
    with open(paths["splits"], "w", encoding="utf-8") as fh:
        for name in sorted(bundle.splits):
            fh.write(f"[{name}]\n")
            fh.write(" ".join(str(int(v)) for v in bundle.splits[name]) + "\n")
    return paths


def load_bundle(directory, task: str = "node-classification") -> DatasetBundle:
    directory = Path(directory)
    labels = directory / "labels.txt"
    splits = directory / "splits.txt"
    return load_edgelist(
        directory / "edges.txt",
        directory / "features.csv",
        labels if labels.exists() else None,
        splits if splits.exists() else None,
        task=task,
    )


def stratified_split(labels: np.ndarray, fracs: Sequence[float],
                     rng: np.random.Generator) -> List[np.ndarray]:
    """Disjoint index sets per fraction, stratified by label."""
    parts: List[List[int]] = [[] for _ in fracs]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        start = 0
        bounds = np.floor(np.cumsum(fracs) * idx.size).astype(int)
        for part, end in zip(parts, bounds):
            part.extend(int(v) for v in idx[start:end])
            start = end
    return [np.sort(np.asarray(p, dtype=np.int64)) for p in parts]


def generate_sbm(n: int, blocks: int, p_in: float, p_out: float, d_feat: int,
                 seed: int = 0, feature_margin: float = 1.0,
                 split_fracs: Sequence[float] = (0.5, 0.25, 0.25)) -> DatasetBundle:
    """Stochastic block model with block-conditioned Gaussian features.

    Block means are unit vectors scaled by ``feature_margin``; labels are block
    ids; splits are stratified train/val/test at ``split_fracs``.
    """
    if not (0.0 <= p_out < p_in <= 1.0):
        raise DatasetFormatError(f"need 0 <= p_out < p_in <= 1, got {p_in}, {p_out}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(blocks), int(np.ceil(n / blocks)))[:n]
    upper = np.triu(rng.random((n, n)), 1)
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_in, p_out)
    adj_upper = (upper < np.triu(prob, 1)) & (np.triu(np.ones((n, n), dtype=bool), 1))
    ii, jj = np.nonzero(adj_upper)
    edges = np.stack([ii, jj], axis=1)
    means = rng.standard_normal((blocks, d_feat))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    features = feature_margin * means[labels] + rng.standard_normal((n, d_feat))
    graph = Graph(n, edges, features, labels)
    names = ("train", "val", "test")[: len(split_fracs)]
    parts = stratified_split(labels, split_fracs, rng)
    return DatasetBundle([graph], "node-classification", dict(zip(names, parts)))
