"""Minimal reverse-mode differentiation over dense 2-D arrays.

Exactly the primitives the training pipeline needs, recorded on an explicit
tape and replayed in reverse.  Gradients accumulate by summation over fan-out
in tape order, which keeps backward passes deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .graphs import SparseSym

EPS_GUARD = 1e-12


class TapeError(RuntimeError):
    pass


@dataclass
class Tensor:
    values: np.ndarray
    requires_grad: bool = False
    grad: Optional[np.ndarray] = None
    node: Optional[int] = None  # index of the producing tape record, None for leaves

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.values.size != 1:
            raise TapeError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.values.reshape(()))


def tensor(values, requires_grad: bool = False) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64), requires_grad=requires_grad)


@dataclass
class _Record:
    op: str
    parents: Tuple[Tensor, ...]
    output: Tensor
    vjps: Tuple[Callable[[np.ndarray], np.ndarray], ...]


class Tape:
    """Ordered record of primitive applications; replay in reverse for gradients.

    A tensor produced by one tape must not feed ops on another: wrap foreign
    values as fresh leaves instead (that is also how stop-gradient is done).
    """

    def __init__(self):
        self._records: List[_Record] = []

    def __len__(self) -> int:
        return len(self._records)

    def _emit(self, op: str, parents: Tuple[Tensor, ...], values: np.ndarray,
              vjps: Tuple[Callable[[np.ndarray], np.ndarray], ...]) -> Tensor:
        for p in parents:
            if p.node is not None and p.node >= len(self._records):
                raise TapeError(f"{op}: parent record {p.node} is not on this tape yet")
        out = Tensor(values)
        out.node = len(self._records)
        self._records.append(_Record(op, parents, out, vjps))
        return out

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape[1] != b.shape[0]:
            raise TapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        av, bv = a.values, b.values
        return self._emit("matmul", (a, b), av @ bv,
                          (lambda g: g @ bv.T, lambda g: av.T @ g))

    def sparse_matmul(self, s: SparseSym, x: Tensor) -> Tensor:
        if s.n != x.shape[0]:
            raise TapeError(f"sparse_matmul shape mismatch: {s.n} vs {x.shape}")
        # the sparse operand is structural (no gradient); symmetric so S^T = S
        return self._emit("sparse_matmul", (x,), s.matmat(x.values),
                          (lambda g: s.matmat(g),))

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape and not (b.shape == (1, a.shape[1])):
            raise TapeError(f"add shape mismatch: {a.shape} + {b.shape}")
        if b.shape == a.shape:
            vjp_b = lambda g: g
        else:  # row-vector bias broadcast over rows
            vjp_b = lambda g: g.sum(axis=0, keepdims=True)
        return self._emit("add", (a, b), a.values + b.values,
                          (lambda g: g, vjp_b))

    def scale(self, a: Tensor, s: float) -> Tensor:
        s = float(s)
        return self._emit("scale", (a,), s * a.values, (lambda g: s * g,))

    def relu(self, a: Tensor) -> Tensor:
        mask = a.values > 0
        return self._emit("relu", (a,), np.where(mask, a.values, 0.0),
                          (lambda g: np.where(mask, g, 0.0),))

    def prelu(self, a: Tensor, slope: Tensor) -> Tensor:
        if slope.values.size != 1:
            raise TapeError("prelu slope must be a scalar tensor")
        av = a.values
        sv = float(slope.values.reshape(()))
        pos = av > 0
        out = np.where(pos, av, sv * av)
        neg_part = np.where(pos, 0.0, av)

        def vjp_a(g):
            return np.where(pos, g, sv * g)

        def vjp_slope(g):
            return np.array([[float((g * neg_part).sum())]])

        return self._emit("prelu", (a, slope), out, (vjp_a, vjp_slope))

    def row_l2_normalize(self, a: Tensor) -> Tensor:
        av = a.values
        norms = np.linalg.norm(av, axis=1, keepdims=True)
        safe = np.maximum(norms, EPS_GUARD)
        out = av / safe

        def vjp(g):
            # rows with clamped norm see the denominator as a constant
            live = (norms > EPS_GUARD)
            dot = (g * out).sum(axis=1, keepdims=True)
            return np.where(live, (g - dot * out) / safe, g / safe)

        return self._emit("row_l2_normalize", (a,), out, (vjp,))

    def mean_reduce(self, a: Tensor) -> Tensor:
        size = a.values.size
        return self._emit("mean_reduce", (a,), np.array([[a.values.mean()]]),
                          (lambda g: np.full(a.shape, float(g.reshape(())) / size),))

    def cosine_rows(self, a: Tensor, b: Tensor) -> Tensor:
        if a.shape != b.shape:
            raise TapeError(f"cosine_rows shape mismatch: {a.shape} vs {b.shape}")
        av, bv = a.values, b.values
        sa = (av * av).sum(axis=1, keepdims=True)
        sb = (bv * bv).sum(axis=1, keepdims=True)
        # one sqrt of the product keeps cos(x, x) == 1 bit-exact
        denom = np.sqrt(sa * sb)
        clamped = denom <= EPS_GUARD
        safe = np.maximum(denom, EPS_GUARD)
        dots = (av * bv).sum(axis=1, keepdims=True)
        # the clip only strips float overshoot; the true value is within [-1, 1]
        cos = np.clip(dots / safe, -1.0, 1.0)

        sa_safe = np.where(sa > 0, sa, 1.0)
        sb_safe = np.where(sb > 0, sb, 1.0)

        def vjp_a(g):
            direct = bv / safe
            # d(denom)/da vanishes where the guard clamps
            through_norm = np.where(clamped, 0.0, cos * av / sa_safe)
            return g * (direct - through_norm)

        def vjp_b(g):
            direct = av / safe
            through_norm = np.where(clamped, 0.0, cos * bv / sb_safe)
            return g * (direct - through_norm)

        return self._emit("cosine_rows", (a, b), cos, (vjp_a, vjp_b))


def backward(tape: Tape, loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into every requires_grad tensor.

    Intermediate adjoints are kept per tape record; leaves and any tensor
    flagged requires_grad receive their total in ``.grad``.
    """
    if loss.values.size != 1:
        raise TapeError("backward needs a scalar loss")
    if loss.node is None:
        raise TapeError("loss tensor was not produced on this tape")
    adjoints: dict[int, np.ndarray] = {loss.node: np.ones((1, 1))}

    def deposit(t: Tensor, g: np.ndarray) -> None:
        if t.requires_grad:
            t.grad = g.copy() if t.grad is None else t.grad + g

    for idx in range(loss.node, -1, -1):
        rec = tape._records[idx]
        g_out = adjoints.pop(idx, None)
        if g_out is None:
            continue
        deposit(rec.output, g_out)
        for parent, vjp in zip(rec.parents, rec.vjps):
            g_in = vjp(g_out)
            if parent.node is not None:
                if parent.node in adjoints:
                    adjoints[parent.node] = adjoints[parent.node] + g_in
                else:
                    adjoints[parent.node] = g_in
            else:
                deposit(parent, g_in)
