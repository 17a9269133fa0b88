"""Adversarial bootstrapped training loop.

Per epoch: sample two Laplacian views, run the student on view 2 as a frozen
target, then run an inner loop that alternates teacher-gradient accumulation
with projected gradient ascent on a hidden-feature perturbation bounded in
l-infinity norm.  The teacher takes the accumulated step; the student tracks
the teacher by exponential moving average only.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .augment import AugmentationPlan, AugmentedViews, sample_views
from .autodiff import Tape, Tensor, backward
from .encoders import EncoderConfig, EncoderParams, encoder_forward, init_params, \
    student_project, teacher_project
from .graphs import Graph, NormalizedLaplacian

CHECKPOINT_MAGIC = b"SBCKPT01"
LOSS_RANGE_SLACK = 0.0  # cosine is clamped, so the +-2 bound is exact


class NonFiniteLossError(RuntimeError):
    """Raised when the loss stops being finite; carries the state for debugging."""

    def __init__(self, epoch: int, value: float, state: "TrainState"):
        super().__init__(f"non-finite loss {value} at epoch {epoch}")
        self.epoch = epoch
        self.state = state


@dataclass
class TrainItem:
    """One graph prepared for training: operator, centrality, and its plan."""

    graph: Graph
    lap: NormalizedLaplacian
    centrality: np.ndarray
    plan: AugmentationPlan


@dataclass
class TrainState:
    teacher: EncoderParams
    student: EncoderParams
    ema_decay: float = 0.998
    eps: float = 0.008
    pgd_step: float = 0.008
    pgd_steps: int = 3
    accum_steps: int = 2
    lr: float = 1e-5
    weight_decay: float = 8e-4
    optimizer: str = "adam"          # "adam" per the shipped defaults, or plain "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    perturb_site: str = "first"      # "first" or "last" hidden layer
    seed: int = 0
    epoch: int = 0
    accum_grad: Dict[str, np.ndarray] = field(default_factory=dict)
    accum_count: int = 0
    adam_m: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: Dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0

    def site_index(self) -> int:
        if self.perturb_site == "first":
            return 0
        if self.perturb_site == "last":
            return len(self.teacher.config.hidden_dims) - 1
        raise ValueError(f"unknown perturb_site '{self.perturb_site}'")


def build_state(encoder_cfg: EncoderConfig, seed: int = 0, **overrides) -> TrainState:
    """Fresh teacher/student pair; the student starts as a copy of the teacher."""
    teacher_cfg = EncoderConfig(**{**encoder_cfg.__dict__, "with_extra_head": True})
    teacher = init_params(teacher_cfg, seed=seed)
    student_cfg = EncoderConfig(**{**encoder_cfg.__dict__, "with_extra_head": False})
    student = EncoderParams(student_cfg)
    for name, t in teacher.params.items():
        if not name.startswith("head."):
            student.params[name] = Tensor(t.values.copy())
    student.set_requires_grad(False)
    return TrainState(teacher=teacher, student=student, seed=seed, **overrides)


def boot_loss(tape: Tape, t_hat: Tensor, z_hat: Tensor) -> Tensor:
    """-2 times the mean row-wise cosine similarity; lands in [-2, 2]."""
    return tape.scale(tape.mean_reduce(tape.cosine_rows(t_hat, z_hat)), -2.0)


def boot_loss_value(t_hat: np.ndarray, z_hat: np.ndarray) -> float:
    tape = Tape()
    return boot_loss(tape, Tensor(t_hat), Tensor(z_hat)).item()


def init_perturbation(shape: Tuple[int, int], eps: float, seed: int) -> Tensor:
    """i.i.d. uniform draws from [-eps, eps]; eps = 0 yields an exact zero tensor."""
    if eps < 0:
        raise ValueError("eps must be >= 0")
    rng = np.random.default_rng(seed)
    if eps == 0.0:
        values = np.zeros(shape)
    else:
        values = rng.uniform(-eps, eps, size=shape)
    return Tensor(values, requires_grad=True)


def pgd_update(state: TrainState, delta: Tensor, grad_delta: np.ndarray) -> Tensor:
    """Frobenius-normalized ascent step, then componentwise clip to [-eps, eps]."""
    if grad_delta.shape != delta.values.shape:
        raise ValueError(f"gradient shape {grad_delta.shape} != delta {delta.values.shape}")
    if state.eps == 0.0:
        return delta  # degenerate ball: the perturbation stays identically zero
    norm = float(np.linalg.norm(grad_delta))
    if norm == 0.0:
        return delta
    stepped = delta.values + state.pgd_step * grad_delta / norm
    return Tensor(np.clip(stepped, -state.eps, state.eps), requires_grad=True)


def accumulate_teacher_grad(state: TrainState, grads: Dict[str, np.ndarray]) -> None:
    """g += grad / T_pgd, creating buffers on first use."""
    inv = 1.0 / state.pgd_steps
    for name, g in grads.items():
        if name in state.accum_grad:
            state.accum_grad[name] = state.accum_grad[name] + inv * g
        else:
            state.accum_grad[name] = inv * g


def teacher_step(state: TrainState) -> None:
    """Apply the accumulated gradient (plus weight decay) and reset the buffer."""
    if state.optimizer not in ("adam", "sgd"):
        raise ValueError(f"unknown optimizer '{state.optimizer}'")
    if state.optimizer == "adam":
        state.adam_t += 1
    for name, tensor in state.teacher.params.items():
        g = state.accum_grad.get(name)
        if g is None:
            g = np.zeros_like(tensor.values)
        g = g + state.weight_decay * tensor.values
        if state.optimizer == "sgd":
            tensor.values = tensor.values - state.lr * g
        else:
            m = state.adam_m.get(name, np.zeros_like(g))
            v = state.adam_v.get(name, np.zeros_like(g))
            m = state.adam_beta1 * m + (1 - state.adam_beta1) * g
            v = state.adam_beta2 * v + (1 - state.adam_beta2) * g * g
            state.adam_m[name] = m
            state.adam_v[name] = v
            m_hat = m / (1 - state.adam_beta1 ** state.adam_t)
            v_hat = v / (1 - state.adam_beta2 ** state.adam_t)
            tensor.values = tensor.values - state.lr * m_hat / (np.sqrt(v_hat) + state.adam_eps)
    state.accum_grad = {}
    state.accum_count = 0


def ema_step(state: TrainState) -> None:
    """theta <- beta * theta + (1 - beta) * xi over the shared parameter names."""
    beta = state.ema_decay
    for name, s_tensor in state.student.params.items():
        t_tensor = state.teacher.params[name]
        s_tensor.values = beta * s_tensor.values + (1.0 - beta) * t_tensor.values


def _teacher_forward_loss(items: Sequence[TrainItem], views: Sequence[AugmentedViews],
                          deltas: List[Tensor], z_consts: List[Tensor],
                          state: TrainState) -> Tuple[Tape, Tensor]:
    site = state.site_index()
    tape = Tape()
    total_rows = sum(z.shape[0] for z in z_consts)
    loss_total: Optional[Tensor] = None
    for item, view, delta, z_const in zip(items, views, deltas, z_consts):
        x = Tensor(item.graph.features)
        h, _ = encoder_forward(tape, view.view1, x, state.teacher,
                               perturbations={site: delta})
        t_hat = teacher_project(tape, h, state.teacher)
        item_loss = boot_loss(tape, t_hat, z_const)
        weighted = tape.scale(item_loss, z_const.shape[0] / total_rows)
        loss_total = weighted if loss_total is None else tape.add(loss_total, weighted)
    return tape, loss_total


def _student_targets(items: Sequence[TrainItem], views: Sequence[AugmentedViews],
                     state: TrainState) -> List[Tensor]:
    targets = []
    for item, view in zip(items, views):
        tape = Tape()
        h, _ = encoder_forward(tape, view.view2, Tensor(item.graph.features), state.student)
        z = student_project(tape, h, state.student)
        targets.append(Tensor(z.values.copy()))  # constant leaf: structural stop-gradient
    return targets


def _site_shape(item: TrainItem, state: TrainState) -> Tuple[int, int]:
    # node-level injection for both encoder kinds
    width = state.teacher.config.hidden_dims[state.site_index()]
    return (item.graph.n_nodes, width)


def train_epoch(items: Sequence[TrainItem], state: TrainState,
                rho: float = 1.0) -> Dict[str, float]:
    """One full epoch; returns the metrics record for the epoch.

    Views are resampled from the stored plans with an epoch-derived seed, so a
    fixed state seed reproduces the whole run bit-for-bit.
    """
    epoch_seed = np.random.SeedSequence([state.seed, state.epoch]).generate_state(1)[0]
    views = [sample_views(item.lap, item.centrality, item.plan,
                          int(epoch_seed) + idx, rho=rho)
             for idx, item in enumerate(items)]
    z_consts = _student_targets(items, views, state)
    deltas = [init_perturbation(_site_shape(item, state), state.eps,
                                int(epoch_seed) + 7919 + idx)
              for idx, item in enumerate(items)]

    losses: List[float] = []
    delta_inf = 0.0
    for _ in range(state.pgd_steps):
        state.teacher.zero_grads()
        for d in deltas:
            d.zero_grad()
        tape, loss = _teacher_forward_loss(items, views, deltas, z_consts, state)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError(state.epoch, value, state)
        assert -2.0 - LOSS_RANGE_SLACK <= value <= 2.0 + LOSS_RANGE_SLACK, value
        losses.append(value)
        backward(tape, loss)
        accumulate_teacher_grad(
            state, {n: t.grad for n, t in state.teacher.params.items() if t.grad is not None})
        new_deltas = []
        for d in deltas:
            g = d.grad if d.grad is not None else np.zeros_like(d.values)
            nd = pgd_update(state, d, g)
            assert np.abs(nd.values).max() <= state.eps + 1e-15
            new_deltas.append(nd)
        deltas = new_deltas
        delta_inf = max(delta_inf, max(float(np.abs(d.values).max()) for d in deltas))

    state.accum_count += 1
    grad_norm = float(np.sqrt(sum(float((g * g).sum()) for g in state.accum_grad.values())))
    if state.accum_count >= state.accum_steps:
        teacher_step(state)
    ema_step(state)
    state.epoch += 1
    return {
        "epoch": state.epoch,
        "loss": float(np.mean(losses)),
        "loss_first": losses[0],
        "loss_last": losses[-1],
        "delta_inf": delta_inf,
        "grad_norm": grad_norm,
    }


def train(items: Sequence[TrainItem], state: TrainState, epochs: int,
          rho: float = 1.0, metrics_out: Optional[List[Dict[str, float]]] = None
          ) -> List[Dict[str, float]]:
    records = metrics_out if metrics_out is not None else []
    for _ in range(epochs):
        records.append(train_epoch(items, state, rho=rho))
    return records


def student_embeddings(graph: Graph, lap: NormalizedLaplacian,
                       state: TrainState) -> np.ndarray:
    """Frozen student encoder output on the clean graph (probe input)."""
    tape = Tape()
    h, _ = encoder_forward(tape, lap, Tensor(graph.features), state.student)
    return h.values.copy()


# -- checkpoint serialization -------------------------------------------------

def _param_block(ep: EncoderParams) -> Dict:
    return {name: {"shape": list(t.values.shape)} for name, t in sorted(ep.params.items())}


def save_checkpoint(state: TrainState, path, config_hash: str = "") -> None:
    """Versioned binary checkpoint: magic, JSON header, then raw float64 blocks."""
    header = {
        "teacher": _param_block(state.teacher),
        "student": _param_block(state.student),
        "adam_m": {k: list(v.shape) for k, v in sorted(state.adam_m.items())},
        "adam_v": {k: list(v.shape) for k, v in sorted(state.adam_v.items())},
        "accum_grad": {k: list(v.shape) for k, v in sorted(state.accum_grad.items())},
        "scalars": {
            "ema_decay": state.ema_decay, "eps": state.eps,
            "pgd_step": state.pgd_step, "pgd_steps": state.pgd_steps,
            "accum_steps": state.accum_steps, "lr": state.lr,
            "weight_decay": state.weight_decay, "optimizer": state.optimizer,
            "adam_beta1": state.adam_beta1, "adam_beta2": state.adam_beta2,
            "adam_eps": state.adam_eps, "perturb_site": state.perturb_site,
            "seed": state.seed, "epoch": state.epoch,
            "accum_count": state.accum_count, "adam_t": state.adam_t,
        },
        "encoder_config": {
            "kind": state.teacher.config.kind,
            "in_dim": state.teacher.config.in_dim,
            "hidden_dims": list(state.teacher.config.hidden_dims),
            "projector_hidden": state.teacher.config.projector_hidden,
            "projector_out": state.teacher.config.projector_out,
        },
        "config_hash": config_hash,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as out:
        out.write(CHECKPOINT_MAGIC)
        out.write(struct.pack("<Q", len(blob)))
        out.write(blob)
        for group, source in (("teacher", state.teacher.params),
                              ("student", state.student.params)):
            for name in sorted(source):
                out.write(np.ascontiguousarray(source[name].values).tobytes())
        for store in (state.adam_m, state.adam_v, state.accum_grad):
            for name in sorted(store):
                out.write(np.ascontiguousarray(store[name]).tobytes())


def load_checkpoint(path) -> TrainState:
    with open(path, "rb") as inp:
        magic = inp.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        (blob_len,) = struct.unpack("<Q", inp.read(8))
        header = json.loads(inp.read(blob_len).decode("utf-8"))
        scal = header["scalars"]
        enc = header["encoder_config"]
        base_cfg = EncoderConfig(kind=enc["kind"], in_dim=enc["in_dim"],
                                 hidden_dims=tuple(enc["hidden_dims"]),
                                 projector_hidden=enc["projector_hidden"],
                                 projector_out=enc["projector_out"])

        def read_array(shape) -> np.ndarray:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(inp.read(8 * count), dtype=np.float64)
            return data.reshape(shape).copy()

        teacher_cfg = EncoderConfig(**{**base_cfg.__dict__, "with_extra_head": True})
        teacher = EncoderParams(teacher_cfg)
        for name, meta in sorted(header["teacher"].items()):
            teacher.params[name] = Tensor(read_array(meta["shape"]), requires_grad=True)
        student = EncoderParams(base_cfg)
        for name, meta in sorted(header["student"].items()):
            student.params[name] = Tensor(read_array(meta["shape"]))
        adam_m = {k: read_array(s) for k, s in sorted(header["adam_m"].items())}
        adam_v = {k: read_array(s) for k, s in sorted(header["adam_v"].items())}
        accum = {k: read_array(s) for k, s in sorted(header["accum_grad"].items())}
    return TrainState(
        teacher=teacher, student=student,
        ema_decay=scal["ema_decay"], eps=scal["eps"], pgd_step=scal["pgd_step"],
        pgd_steps=scal["pgd_steps"], accum_steps=scal["accum_steps"], lr=scal["lr"],
        weight_decay=scal["weight_decay"], optimizer=scal["optimizer"],
        adam_beta1=scal["adam_beta1"], adam_beta2=scal["adam_beta2"],
        adam_eps=scal["adam_eps"], perturb_site=scal["perturb_site"],
        seed=scal["seed"], epoch=scal["epoch"], accum_count=scal["accum_count"],
        adam_t=scal["adam_t"], accum_grad=accum, adam_m=adam_m, adam_v=adam_v,
    )


def checkpoint_hash(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as inp:
        for chunk in iter(lambda: inp.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
