"""GCN and GIN encoders plus the projector/predictor heads.

Encoders consume a Laplacian view L through its propagation operator I - L and
dense node features.  Teacher and student share one architectural blueprint;
the teacher additionally carries a second MLP head after its projector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import Tape, Tensor
from .graphs import NormalizedLaplacian, SparseSym


class EncoderConfigError(ValueError):
    pass


@dataclass
class EncoderConfig:
    kind: str = "gcn"                      # "gcn" (node tasks) or "gin" (graph tasks)
    in_dim: int = 0
    hidden_dims: Tuple[int, ...] = (512, 256)
    projector_hidden: int = 512
    projector_out: int = 0                 # 0 -> same as encoder output dim
    with_extra_head: bool = False          # teacher carries the extra MLP head

    @property
    def out_dim(self) -> int:
        return self.hidden_dims[-1]

    @property
    def proj_dim(self) -> int:
        return self.projector_out or self.out_dim

    def validate(self) -> None:
        if self.kind not in ("gcn", "gin"):
            raise EncoderConfigError(f"unknown encoder kind '{self.kind}'")
        if self.in_dim <= 0:
            raise EncoderConfigError("in_dim must be positive")
        if not self.hidden_dims:
            raise EncoderConfigError("need at least one hidden layer")
        if self.kind == "gin" and len(set(self.hidden_dims)) != 1:
            raise EncoderConfigError("gin layers must share one hidden size")


@dataclass
class EncoderParams:
    """Named parameter tensors for one network (encoder + head(s))."""

    config: EncoderConfig
    params: Dict[str, Tensor] = field(default_factory=dict)

    def names(self) -> List[str]:
        return list(self.params)

    def set_requires_grad(self, flag: bool) -> None:
        for t in self.params.values():
            t.requires_grad = flag

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def clone(self) -> "EncoderParams":
        out = EncoderParams(self.config)
        for name, t in self.params.items():
            out.params[name] = Tensor(t.values.copy(), requires_grad=t.requires_grad)
        return out

    def value_hash(self) -> str:
        import hashlib

        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode())
            digest.update(self.params[name].values.tobytes())
        return digest.hexdigest()


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _init_mlp(params: Dict[str, Tensor], rng: np.random.Generator, prefix: str,
              dims: Sequence[int]) -> None:
    for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
        params[f"{prefix}.w{i}"] = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
        params[f"{prefix}.b{i}"] = Tensor(np.zeros((1, d_out)), requires_grad=True)


def init_params(config: EncoderConfig, seed: int = 0) -> EncoderParams:
    """Glorot-uniform weights, zero biases, PReLU slopes at 0.25."""
    config.validate()
    rng = np.random.default_rng(seed)
    p: Dict[str, Tensor] = {}
    dims = (config.in_dim,) + tuple(config.hidden_dims)
    if config.kind == "gcn":
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            p[f"enc.w{i}"] = Tensor(_glorot(rng, d_in, d_out), requires_grad=True)
            p[f"enc.b{i}"] = Tensor(np.zeros((1, d_out)), requires_grad=True)
            p[f"enc.slope{i}"] = Tensor(np.array([[0.25]]), requires_grad=True)
    else:
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            _init_mlp(p, rng, f"enc.mlp{i}", (d_in, d_out, d_out))
    _init_mlp(p, rng, "proj", (config.out_dim, config.projector_hidden, config.proj_dim))
    p["proj.slope"] = Tensor(np.array([[0.25]]), requires_grad=True)
    if config.with_extra_head:
        _init_mlp(p, rng, "head", (config.proj_dim, config.projector_hidden, config.proj_dim))
        p["head.slope"] = Tensor(np.array([[0.25]]), requires_grad=True)
    return EncoderParams(config, p)


def propagation_operator(view: NormalizedLaplacian) -> SparseSym:
    """I - L for the given view, materialized as a symmetric operator."""
    return SparseSym.from_dense(np.eye(view.n) - view.to_dense())


def binary_adjacency(view: NormalizedLaplacian, threshold: float = 0.5) -> SparseSym:
    """Off-diagonal entries of I - L thresholded to {0, 1} for GIN aggregation."""
    prop = view.propagation_dense().copy()
    np.fill_diagonal(prop, 0.0)
    binary = (np.abs(prop) > threshold).astype(np.float64)
    binary = np.tril(binary) + np.tril(binary, -1).T
    np.fill_diagonal(binary, 0.0)
    return SparseSym.from_dense(binary)


def gcn_forward(tape: Tape, view: NormalizedLaplacian, x: Tensor,
                ep: EncoderParams, perturbations: Optional[Dict[int, Tensor]] = None
                ) -> Tuple[Tensor, List[Tensor]]:
    """Stacked propagate->linear->PReLU layers.

    ``perturbations`` maps a layer index to an additive hidden-state tensor
    applied right after that layer's activation (the adversarial injection
    site).  Returns the final node embedding and every layer output.
    """
    cfg = ep.config
    prop = propagation_operator(view)
    h = x
    hidden: List[Tensor] = []
    for i in range(len(cfg.hidden_dims)):
        agg = tape.sparse_matmul(prop, h)
        z = tape.add(tape.matmul(agg, ep.params[f"enc.w{i}"]), ep.params[f"enc.b{i}"])
        h = tape.prelu(z, ep.params[f"enc.slope{i}"])
        if perturbations and i in perturbations:
            h = tape.add(h, perturbations[i])
        hidden.append(h)
    return h, hidden


def _mlp_forward(tape: Tape, x: Tensor, ep: EncoderParams, prefix: str,
                 n_layers: int = 2, activation: str = "relu",
                 slope_name: Optional[str] = None) -> Tensor:
    h = x
    for i in range(n_layers):
        h = tape.add(tape.matmul(h, ep.params[f"{prefix}.w{i}"]),
                     ep.params[f"{prefix}.b{i}"])
        if i < n_layers - 1:
            if activation == "relu":
                h = tape.relu(h)
            else:
                h = tape.prelu(h, ep.params[slope_name])
    return h


def gin_forward(tape: Tape, view: NormalizedLaplacian, x: Tensor,
                ep: EncoderParams, perturbations: Optional[Dict[int, Tensor]] = None
                ) -> Tuple[Tensor, List[Tensor]]:
    """Sum-aggregation GIN over the thresholded view adjacency.

    Each layer computes MLP(h + sum_neighbors h) with the isomorphism epsilon
    fixed at zero; the readout sum-pools every layer and averages the pools.
    Returns the pooled graph embedding and the per-layer node states.
    """
    cfg = ep.config
    adj = binary_adjacency(view)
    n = view.n
    h = x
    hidden: List[Tensor] = []
    pools: List[Tensor] = []
    ones_row = Tensor(np.ones((1, n)))
    for i in range(len(cfg.hidden_dims)):
        agg = tape.add(h, tape.sparse_matmul(adj, h))
        h = _mlp_forward(tape, agg, ep, f"enc.mlp{i}", activation="relu")
        if perturbations and i in perturbations:
            h = tape.add(h, perturbations[i])
        hidden.append(h)
        pools.append(tape.matmul(ones_row, h))  # sum over nodes
    acc = pools[0]
    for pool in pools[1:]:
        acc = tape.add(acc, pool)
    return tape.scale(acc, 1.0 / len(pools)), hidden


def encoder_forward(tape: Tape, view: NormalizedLaplacian, x: Tensor,
                    ep: EncoderParams,
                    perturbations: Optional[Dict[int, Tensor]] = None
                    ) -> Tuple[Tensor, List[Tensor]]:
    if ep.config.kind == "gcn":
        return gcn_forward(tape, view, x, ep, perturbations)
    return gin_forward(tape, view, x, ep, perturbations)


def teacher_project(tape: Tape, h: Tensor, ep: EncoderParams) -> Tensor:
    """Projector followed by the extra MLP head (teacher side)."""
    z = _mlp_forward(tape, h, ep, "proj", activation="prelu", slope_name="proj.slope")
    if "head.w0" not in ep.params:
        raise EncoderConfigError("teacher params were built without the extra head")
    return _mlp_forward(tape, z, ep, "head", activation="prelu", slope_name="head.slope")


def student_project(tape: Tape, h: Tensor, ep: EncoderParams) -> Tensor:
    """Projector only (student side)."""
    return _mlp_forward(tape, h, ep, "proj", activation="prelu", slope_name="proj.slope")
