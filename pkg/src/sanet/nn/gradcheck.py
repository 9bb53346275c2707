"""Central-difference gradient verification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .autograd import Tape, Tensor, backward


@dataclass
class GradReport:
    name: str
    size: int
    max_rel_error: float
    passed: bool


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Elementwise ``|a-b| / max(|a|, |b|, floor)``."""
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def numeric_grad(loss_fn: Callable[[], Tensor], param: Tensor, step: float) -> np.ndarray:
    out = np.zeros_like(param.value)
    base = param.value
    flat = base.reshape(-1)
    for i in range(flat.size):
        vals = []
        for sgn in (1.0, -1.0):
            bumped = flat.copy()
            bumped[i] += sgn * step
            param.value = bumped.reshape(base.shape)
            vals.append(float(loss_fn().value))
        out.reshape(-1)[i] = (vals[0] - vals[1]) / (2.0 * step)
    param.value = base
    return out


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-6,
    tol: float = 1e-4,
    names: Sequence[str] | None = None,
) -> list[GradReport]:
    """Compare tape gradients of ``loss_fn()`` with central differences per parameter."""
    with Tape() as tape:
        loss = loss_fn()
    analytic = backward(tape, loss, params)
    reports = []
    for i, p in enumerate(params):
        num = numeric_grad(loss_fn, p, step)
        err = float(relative_error(analytic[p], num).max()) if p.size else 0.0
        name = names[i] if names else (p.name or f"param{i}")
        reports.append(GradReport(name, p.size, err, err <= tol))
    return reports
