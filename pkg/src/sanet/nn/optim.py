"""ADAM, plateau learning-rate decay and early stopping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch
from .autograd import Tensor


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state: AdamState, params: Sequence[Tensor], grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected ADAM update.

    Each parameter's ``value`` is replaced by a fresh array, so a reader
    holding the old array never sees a half-applied step.
    """
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ShapeMismatch("parameter/gradient/moment counts differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.value.shape:
            raise ShapeMismatch(f"grad {g.shape} vs param {p.value.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.value = p.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = value

    def step(self, grads) -> None:
        if isinstance(grads, dict):
            grads = [grads[p] for p in self.params]
        adam_step(self.state, self.params, grads)


@dataclass
class TrainControl:
    """Plateau decay, early stopping and regularisation knobs."""

    factor: float = 0.77
    patience: int = 10
    early_stop_patience: int = 100
    l2: float = 0.0
    dropout: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {self.factor}")
        if self.patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, optimizer: Adam, factor: float, patience: int):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> float:
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.optimizer.lr = self.optimizer.lr * self.factor
                self.bad_epochs = 0
        return self.optimizer.lr


class EarlyStopping:
    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> bool:
        """Record an epoch; True once ``patience`` epochs passed without improvement."""
        if metric < self.best:
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
        return self.bad_epochs >= self.patience
