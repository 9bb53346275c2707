"""Scalar training objectives."""
from __future__ import annotations

import numpy as np

from ..errors import EmptyMask, ShapeMismatch
from .autograd import Tensor, as_tensor, record


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-softmax of the target class.

    ``logits`` is ``[C]`` or ``[B, C]``; ``labels`` a class id or ``[B]`` ids.
    """
    logits = as_tensor(logits)
    Z = logits.value
    single = Z.ndim == 1
    Z2 = Z[None, :] if single else Z
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if y.shape[0] != Z2.shape[0]:
        raise ShapeMismatch(f"{y.shape[0]} labels for {Z2.shape[0]} rows of logits")
    shifted = Z2 - Z2.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    B = Z2.shape[0]
    loss = -logp[np.arange(B), y].mean()

    def back(g):
        p = np.exp(logp)
        p[np.arange(B), y] -= 1.0
        grad = g * p / B
        return (grad[0] if single else grad,)

    return record(np.asarray(loss), (logits,), back)


def masked_l1(pred, target, mask) -> Tensor:
    """Mean absolute error over entries where ``mask`` is true."""
    pred = as_tensor(pred)
    P = pred.value
    T = np.asarray(target, dtype=np.float64).reshape(P.shape)
    M = np.asarray(mask, dtype=bool).reshape(P.shape)
    count = int(M.sum())
    if count == 0:
        raise EmptyMask("mask selects no entries")
    diff = P - T
    loss = np.abs(diff[M]).sum() / count

    def back(g):
        return (g * np.sign(diff) * M / count,)

    return record(np.asarray(loss), (pred,), back)


def l2_penalty(params, coeff: float) -> Tensor:
    """``coeff * sum ||W||^2``; its gradient is exactly ``2 coeff W``."""
    from . import functional as F

    terms = [F.sum(F.mul(p, p)) for p in params]
    if not terms:
        return as_tensor(0.0)
    return F.scale(F.add_n(terms), coeff)
