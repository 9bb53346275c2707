"""Tape-based reverse-mode differentiation over numpy arrays.

Operations record themselves on the innermost active :class:`Tape` when at
least one input requires a gradient. Records are appended in execution
order, so the record list is already topologically sorted and the backward
pass simply walks it in reverse.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import NonScalarLoss

_TAPES: list["Tape"] = []


class Tensor:
    """A float64 array with an optional gradient slot."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_from_tape")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._from_tape = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the functional module holds the actual rules
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __neg__(self):
        from . import functional as F
        return F.scale(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out, parents, backward):
        self.out = out
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered operation record plus the registry of leaf parameters it touched."""

    def __init__(self):
        self.records: list[_Record] = []
        self.params: dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self) -> int:
        return len(self.records)

    def _append(self, out: Tensor, parents: Sequence[Tensor], backward: Callable) -> None:
        for p in parents:
            if p.requires_grad and not p._from_tape:
                self.params.setdefault(id(p), p)
        out._from_tape = True
        self.records.append(_Record(out, tuple(parents), backward))

    def clear(self) -> None:
        self.records.clear()
        self.params.clear()


def active_tape() -> Tape | None:
    return _TAPES[-1] if _TAPES else None


def record(value: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    """Wrap an op result, registering ``backward(grad) -> parent grads`` if needed."""
    tape = active_tape()
    needs = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape._append(out, parents, backward)
    return out


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(tape: Tape, loss: Tensor, params: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar ``loss``.

    Returns a map from parameter to gradient and stores it in ``param.grad``.
    Parameters that the loss does not depend on get zero gradients. The tape
    is cleared afterwards so intermediates can be collected.
    """
    if loss.value.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    targets = list(params) if params is not None else list(tape.params.values())
    grads: dict[int, np.ndarray] = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.value)
    for rec in reversed(tape.records):
        g = grads.pop(id(rec.out), None)
        if g is None:
            continue
        parent_grads = rec.backward(g)
        for p, pg in zip(rec.parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    out = {}
    for p in targets:
        g = grads.get(id(p))
        g = np.zeros_like(p.value) if g is None else np.asarray(g, dtype=np.float64).reshape(p.shape)
        p.grad = g
        out[p] = g
    tape.clear()
    return out
