"""Centrality-guided augmentation: max/min view optimization and view sampling.

Two probability matrices over node pairs start from the centrality outer
product.  One is pushed by projected gradient ascent to maximize the extremal
spectral displacement of the modified Laplacian, the other descends to keep the
spectrum close to the original.  Binary views are then Bernoulli-sampled from
the optimized probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, TextIO, Tuple

import numpy as np

from .graphs import Graph, NormalizedLaplacian
from .spectral import (
    SpectralSummary,
    build_modified_laplacian,
    extremal_eigs,
    spectral_loss,
    spectral_loss_grad,
    spectral_norm_objective,
)

BUDGET_SLACK = 1e-9
PLAN_FORMAT_VERSION = 1
SUBSAMPLE_DEFAULT_THRESHOLD = 10_000
DENSE_SUPPORT_MAX_N = 2_000


class AugmentationError(RuntimeError):
    pass


@dataclass
class AugmentConfig:
    """Knobs for one optimization run (defaults follow the shipped config)."""

    budget_ratio: float = 0.5
    step: float = 0.5
    iterations: int = 20
    eig_k: int = 4
    decay: bool = True
    objective: str = "squared_diff"   # or "norm"
    sign_max: float = 1.0
    sign_min: float = -1.0
    eig_tol: float = 1e-8
    eig_max_iter: int = 100_000
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.budget_ratio <= 1.0:
            raise AugmentationError(f"budget_ratio must be in (0,1], got {self.budget_ratio}")
        if self.iterations < 0:
            raise AugmentationError("iterations must be >= 0")
        if self.step <= 0:
            raise AugmentationError("step must be positive")
        if self.eig_k < 1:
            raise AugmentationError("eig_k must be >= 1")
        if self.objective not in ("squared_diff", "norm"):
            raise AugmentationError(f"unknown objective '{self.objective}'")


@dataclass
class AugmentationPlan:
    """Optimized pair of augmentation matrices plus the run metadata."""

    delta_max: np.ndarray
    delta_min: np.ndarray
    budget: float
    budget_ratio: float
    iterations: int
    step: float
    trace_max: List[float] = field(default_factory=list)
    trace_min: List[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.delta_max.shape[0]


@dataclass
class AugmentedViews:
    """Binary-sampled Laplacian views ready for the encoders."""

    view1: NormalizedLaplacian
    view2: NormalizedLaplacian
    sample_seed: int


def init_deltas(c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Both matrices start at the centrality outer product on strict lower triangle."""
    c = np.asarray(c, dtype=np.float64).ravel()
    outer = np.tril(np.outer(c, c), -1)
    return outer.copy(), outer.copy()


def project_box_budget(delta: np.ndarray, budget: float) -> np.ndarray:
    """Clip entries to [0, 1], then scale uniformly if the total exceeds the budget.

    Scaling by budget/total < 1 cannot push entries outside the box, so no
    second clip is needed.
    """
    if budget < 0:
        raise AugmentationError("budget must be >= 0")
    out = np.clip(delta, 0.0, 1.0)
    total = out.sum()
    if total > budget:
        out = out * (budget / total) if total > 0 else out
    return out


def compute_budget(g: Graph, r: float) -> float:
    """Total augmentation mass cap: r times the undirected edge count."""
    if not 0.0 < r <= 1.0:
        raise AugmentationError(f"budget ratio must be in (0,1], got {r}")
    return r * g.n_edges


def _check_plan_invariants(delta: np.ndarray, budget: float) -> None:
    if delta.min() < 0.0 or delta.max() > 1.0:
        raise AugmentationError("delta entry escaped [0,1] after projection")
    if delta.sum() > budget + BUDGET_SLACK:
        raise AugmentationError(
            f"budget violated: sum={delta.sum():.12g} > {budget:.12g} + {BUDGET_SLACK}"
        )


def support_mask(lap: NormalizedLaplacian, c: np.ndarray, g: Optional[Graph] = None,
                 rho: float = 1.0) -> np.ndarray:
    """Strict lower-triangle support for the optimized entries.

    Below DENSE_SUPPORT_MAX_N every node pair participates.  Above it the
    support shrinks to existing edges plus the top rho fraction of non-edge
    pairs ranked by c_i * c_j, which keeps updates sparse on big graphs.
    """
    n = lap.n
    full = np.tril(np.ones((n, n), dtype=bool), -1)
    if n <= DENSE_SUPPORT_MAX_N or g is None:
        return full
    mask = np.zeros((n, n), dtype=bool)
    mask[g.edges[:, 1], g.edges[:, 0]] = True
    nonedge = full & ~mask
    idx = np.argwhere(nonedge)
    scores = c[idx[:, 0]] * c[idx[:, 1]]
    keep = int(round(rho * idx.shape[0]))
    if keep > 0:
        top = np.argsort(scores, kind="stable")[::-1][:keep]
        mask[idx[top, 0], idx[top, 1]] = True
    return mask


def _objective_and_grad(lap: NormalizedLaplacian, c: np.ndarray, delta: np.ndarray,
                        orig: SpectralSummary, cfg: AugmentConfig,
                        support: np.ndarray) -> Tuple[float, np.ndarray]:
    mod_m = build_modified_laplacian(lap, c, delta)
    mod = extremal_eigs(mod_m, cfg.eig_k, tol=cfg.eig_tol,
                        max_iter=cfg.eig_max_iter, seed=cfg.seed)
    if cfg.objective == "squared_diff":
        loss = spectral_loss(orig, mod, sign=1)
    else:
        loss = spectral_norm_objective(mod, sign=1)
    grad = spectral_loss_grad(lap, c, delta, mod, orig, support=support,
                              objective=cfg.objective)
    return loss, grad


def _optimize_single(lap: NormalizedLaplacian, c: np.ndarray, budget: float,
                     orig: SpectralSummary, cfg: AugmentConfig, sign: float,
                     support: np.ndarray) -> Tuple[np.ndarray, List[float]]:
    delta = project_box_budget(init_deltas(c)[0] * support, budget)
    trace: List[float] = []
    for t in range(1, cfg.iterations + 1):
        loss, grad = _objective_and_grad(lap, c, delta, orig, cfg, support)
        trace.append(loss)
        step = cfg.step / np.sqrt(t) if cfg.decay else cfg.step
        delta = project_box_budget(delta + sign * step * grad, budget)
        _check_plan_invariants(delta, budget)
    final_m = build_modified_laplacian(lap, c, delta)
    final = extremal_eigs(final_m, cfg.eig_k, tol=cfg.eig_tol,
                          max_iter=cfg.eig_max_iter, seed=cfg.seed)
    if cfg.objective == "squared_diff":
        trace.append(spectral_loss(orig, final, sign=1))
    else:
        trace.append(spectral_norm_objective(final, sign=1))
    return delta, trace


def optimize_views(lap: NormalizedLaplacian, c: np.ndarray, g: Graph,
                   cfg: AugmentConfig) -> AugmentationPlan:
    """Run the max then the min optimization and return the finished plan.

    The two runs are independent: same initialization, opposite step signs.
    Every iterate is re-projected and the box/budget invariants are asserted
    throughout.  The recorded traces hold the (+1-signed) objective at each
    iterate including the final one.
    """
    cfg.validate()
    c = np.asarray(c, dtype=np.float64).ravel()
    budget = compute_budget(g, cfg.budget_ratio)
    support = support_mask(lap, c, g)
    orig = extremal_eigs(lap.matrix, cfg.eig_k, tol=cfg.eig_tol,
                         max_iter=cfg.eig_max_iter, seed=cfg.seed)
    delta_max, trace_max = _optimize_single(lap, c, budget, orig, cfg,
                                            cfg.sign_max, support)
    delta_min, trace_min = _optimize_single(lap, c, budget, orig, cfg,
                                            cfg.sign_min, support)
    return AugmentationPlan(delta_max, delta_min, budget, cfg.budget_ratio,
                            cfg.iterations, cfg.step, trace_max, trace_min)


def sample_views(lap: NormalizedLaplacian, c: np.ndarray, plan: AugmentationPlan,
                 seed: int, rho: float = 1.0,
                 subsample_threshold: int = SUBSAMPLE_DEFAULT_THRESHOLD) -> AugmentedViews:
    """Bernoulli-sample binary matrices from the plan and build both views.

    For graphs above ``subsample_threshold`` nodes only a rho fraction of the
    support pairs is even considered per draw; everything else samples to 0.
    Bit-reproducible for a fixed seed.
    """
    if not 0.0 < rho <= 1.0:
        raise AugmentationError(f"rho must be in (0,1], got {rho}")
    rng = np.random.default_rng(seed)
    c = np.asarray(c, dtype=np.float64).ravel()
    samples = []
    for delta in (plan.delta_max, plan.delta_min):
        probs = delta
        if plan.n > subsample_threshold and rho < 1.0:
            keep = rng.random(delta.shape) < rho
            probs = np.where(keep, delta, 0.0)
        sample = (rng.random(delta.shape) < probs).astype(np.float64)
        samples.append(sample)
    view1 = NormalizedLaplacian(build_modified_laplacian(lap, c, samples[0]),
                                lap.degree_root_inv)
    view2 = NormalizedLaplacian(build_modified_laplacian(lap, c, samples[1]),
                                lap.degree_root_inv)
    return AugmentedViews(view1, view2, seed)


def _write_delta(out: TextIO, name: str, delta: np.ndarray) -> None:
    out.write(f"[{name}]\n")
    rows, cols = np.nonzero(delta)
    for i, j in zip(rows, cols):
        out.write(f"{i} {j} {float(delta[i, j])!r}\n")


def save_plan(plan: AugmentationPlan, path) -> None:
    """Versioned text serialization: header fields, then sparse delta triplets.

    Floats are written with repr (shortest round-trip form), so save followed
    by load reproduces the plan exactly.
    """
    with open(path, "w", encoding="utf-8") as out:
        out.write(f"# augmentation-plan v{PLAN_FORMAT_VERSION}\n")
        out.write(f"n={plan.n}\n")
        out.write(f"budget_ratio={float(plan.budget_ratio)!r}\n")
        out.write(f"budget={float(plan.budget)!r}\n")
        out.write(f"iterations={plan.iterations}\n")
        out.write(f"step={float(plan.step)!r}\n")
        out.write(f"trace_max={','.join(repr(float(v)) for v in plan.trace_max)}\n")
        out.write(f"trace_min={','.join(repr(float(v)) for v in plan.trace_min)}\n")
        _write_delta(out, "delta_max", plan.delta_max)
        _write_delta(out, "delta_min", plan.delta_min)


def load_plan(path) -> AugmentationPlan:
    with open(path, "r", encoding="utf-8") as inp:
        return _parse_plan(inp)


def _parse_plan(inp: TextIO) -> AugmentationPlan:
    header = inp.readline().strip()
    if header != f"# augmentation-plan v{PLAN_FORMAT_VERSION}":
        raise AugmentationError(f"unsupported plan header: {header!r}")
    fields = {}
    deltas = {}
    current: Optional[np.ndarray] = None
    for raw in inp:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1]
            n = int(fields["n"])
            deltas[name] = np.zeros((n, n))
            current = deltas[name]
        elif current is not None:
            i, j, v = line.split()
            current[int(i), int(j)] = float(v)
        else:
            key, _, value = line.partition("=")
            fields[key] = value
    traces = {}
    for key in ("trace_max", "trace_min"):
        raw = fields.get(key, "")
        traces[key] = [float(v) for v in raw.split(",") if v]
    return AugmentationPlan(
        delta_max=deltas["delta_max"],
        delta_min=deltas["delta_min"],
        budget=float(fields["budget"]),
        budget_ratio=float(fields["budget_ratio"]),
        iterations=int(fields["iterations"]),
        step=float(fields["step"]),
        trace_max=traces["trace_max"],
        trace_min=traces["trace_min"],
    )
