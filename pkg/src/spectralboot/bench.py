"""Operation and storage accounting for the eigensolver and sparse structures.

The timing sweep uses synthetic symmetric matrices whose 2K extremal
eigenvalues sit well clear of a tight bulk, the regime the selective solver is
built for: there the Krylov dimension tracks K, so cost grows like K * n^2.
Storage counters report coordinate-triplet bytes, which scale with the nonzero
count rather than n^2.
"""

from __future__ import annotations

import time
from typing import Dict, List

import numpy as np

from .data import generate_sbm
from .graphs import SparseSym, build_adjacency
from .spectral import extremal_eigs


def separated_spectrum_matrix(n: int, k: int, seed: int = 0) -> SparseSym:
    """Dense symmetric matrix with K isolated lowest and highest eigenvalues.

    A scaled Wigner bulk (spectral radius ~1) plus large diagonal outliers on
    2K coordinates; the outliers sit near +-(3..4), well clear of the bulk, so
    the Krylov dimension needed tracks K.  Costs O(n^2) to build.
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) * (0.5 / np.sqrt(n))
    dense = g + g.T
    outliers = np.concatenate([-3.0 - np.linspace(0.0, 1.0, k),
                               3.0 + np.linspace(0.0, 1.0, k)])
    pos = rng.permutation(n)[: 2 * k]
    dense[pos, pos] += outliers
    dense = np.tril(dense) + np.tril(dense, -1).T
    return SparseSym.from_dense(dense)


def time_eigensolve(n: int, k: int, tol: float, seed: int = 0,
                    repeats: int = 1) -> float:
    m = separated_spectrum_matrix(n, k, seed=seed)
    m.to_dense()  # pre-materialize so only the solve is timed
    best = np.inf
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        extremal_eigs(m, k, tol=tol, seed=seed)
        best = min(best, time.perf_counter() - start)
    return best


def eigensolve_sweep(sizes, ks, tol: float = 1e-6, seed: int = 0,
                     repeats: int = 2) -> List[Dict]:
    records = []
    for n in sizes:
        for k in ks:
            if 2 * k > n:
                continue
            records.append({
                "n": int(n),
                "k": int(k),
                "seconds": time_eigensolve(int(n), int(k), tol, seed, repeats),
            })
    return records


def doubling_ratios(records: List[Dict], fixed: str, doubled: str) -> List[Dict]:
    """Time ratios between records where ``doubled`` doubles at fixed ``fixed``."""
    out = []
    for a in records:
        for b in records:
            if a[fixed] == b[fixed] and b[doubled] == 2 * a[doubled]:
                out.append({
                    fixed: a[fixed],
                    f"{doubled}_from": a[doubled],
                    f"{doubled}_to": b[doubled],
                    "ratio": b["seconds"] / a["seconds"] if a["seconds"] > 0 else float("inf"),
                })
    return out


def storage_sweep(sizes, p_edge: float = 0.02, seed: int = 0) -> List[Dict]:
    """Triplet storage bytes and nnz for SBM graphs of growing size."""
    records = []
    for n in sizes:
        bundle = generate_sbm(int(n), 2, min(1.0, 2 * p_edge), p_edge, 4, seed=seed)
        adj = build_adjacency(bundle.graph)
        records.append({
            "n": int(n),
            "nnz": adj.nnz,
            "triplet_bytes": adj.storage_bytes(),
            "dense_bytes": int(8 * n * n),
            "bytes_per_nnz": adj.storage_bytes() / adj.nnz if adj.nnz else 0.0,
        })
    return records


def run_bench(sizes, ks, tol: float = 1e-6, seed: int = 0, repeats: int = 6) -> Dict:
    sizes = [int(n) for n in sizes if int(n) > 0]
    ks = [int(k) for k in ks if int(k) > 0]
    if not sizes or not ks:
        return {"eigensolve": [], "ratios_k": [], "ratios_n": [], "storage": []}
    eig = eigensolve_sweep(sizes, ks, tol=tol, seed=seed, repeats=repeats)
    return {
        "eigensolve": eig,
        "ratios_k": doubling_ratios(eig, fixed="n", doubled="k"),
        "ratios_n": doubling_ratios(eig, fixed="k", doubled="n"),
        "storage": storage_sweep(sizes, seed=seed),
    }
