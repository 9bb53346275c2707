"""Differentiable primitives.

Arrays may carry leading batch axes; matrix-like ops act on the last two
axes (simplices x features).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import EmptyNeighborhood, ShapeMismatch
from .autograd import Tensor, as_tensor, record, unbroadcast


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.value.shape[-1] != b.value.shape[-2 if b.value.ndim > 1 else 0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    A, B = a.value, b.value

    def back(g):
        ga = unbroadcast(g @ _swap(B), A.shape) if a.requires_grad else None
        gb = unbroadcast(_swap(A) @ g, B.shape) if b.requires_grad else None
        return ga, gb

    return record(A @ B, (a, b), back)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.value + b.value
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return record(out, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.value - b.value
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return record(out, (a, b), lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    A, B = a.value, b.value
    try:
        out = A * B
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc

    def back(g):
        ga = unbroadcast(g * B, A.shape) if a.requires_grad else None
        gb = unbroadcast(g * A, B.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), back)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return record(a.value * c, (a,), lambda g: (g * c,))


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Sum of equally shaped tensors as a single record."""
    tensors = [as_tensor(t) for t in tensors]
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ShapeMismatch("add_n needs identical shapes")
    out = tensors[0].value.copy()
    for t in tensors[1:]:
        out += t.value
    return record(out, tuple(tensors), lambda g: tuple(g for _ in tensors))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along ``axis`` (default: feature columns)."""
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    splits = np.cumsum([t.value.shape[axis] for t in tensors])[:-1]
    return record(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


concat_cols = concat


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    return record(a.value.reshape(shape), (a,), lambda g: (g.reshape(src),))


def getitem(a, key) -> Tensor:
    """Basic (non-fancy) indexing."""
    a = as_tensor(a)

    def back(g):
        full = np.zeros_like(a.value)
        full[key] = g
        return (full,)

    return record(a.value[key], (a,), back)


# -- pointwise nonlinearities ------------------------------------------------

def _leaky_grad(x, y, slope):
    return np.where(x > 0, 1.0, slope)


def _relu_grad(x, y, slope):
    return (x > 0).astype(np.float64)


def _tanh_grad(x, y, slope):
    return 1.0 - y * y


def _identity_grad(x, y, slope):
    return np.ones_like(x)


ACTIVATIONS = {
    "identity": lambda x, slope: x.copy(),
    "relu": lambda x, slope: np.maximum(x, 0.0),
    "tanh": lambda x, slope: np.tanh(x),
    "leaky_relu": lambda x, slope: np.where(x > 0, x, slope * x),
}
ACTIVATION_GRADS = {
    "identity": _identity_grad,
    "relu": _relu_grad,
    "tanh": _tanh_grad,
    "leaky_relu": _leaky_grad,
}


def activation(x, name: str, slope: float = 0.2) -> Tensor:
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown nonlinearity {name!r}")
    x = as_tensor(x)
    X = x.value
    Y = ACTIVATIONS[name](X, slope)
    return record(Y, (x,), lambda g: (g * ACTIVATION_GRADS[name](X, Y, slope),))


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    return activation(x, "leaky_relu", slope)


def relu(x) -> Tensor:
    return activation(x, "relu")


def tanh(x) -> Tensor:
    return activation(x, "tanh")


def identity(x) -> Tensor:
    return activation(x, "identity")


# -- reductions ----------------------------------------------------------------

def sum(x) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape
    return record(np.asarray(x.value.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_rows(x) -> Tensor:
    """Mean over the simplex axis (second to last)."""
    x = as_tensor(x)
    n = x.value.shape[-2]
    shape = x.shape

    def back(g):
        return (np.broadcast_to(np.expand_dims(g, -2) / n, shape).copy(),)

    return record(x.value.mean(axis=-2), (x,), back)


# -- dropout -------------------------------------------------------------------

def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity outside training or when ``p == 0``."""
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return record(x.value * keep, (x,), lambda g: (g * keep,))


# -- sparse operators ------------------------------------------------------------

def _apply_left(S, X: np.ndarray) -> np.ndarray:
    """``S @ X`` over the simplex axis of a possibly batched array."""
    if X.ndim == 2:
        return np.asarray(S @ X)
    m = X.shape[-2]
    moved = np.moveaxis(X, -2, 0)
    flat = moved.reshape(m, -1)
    out = np.asarray(S @ flat).reshape((S.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, -2)


def sparse_matmul(S, x, symmetric: bool = False) -> Tensor:
    """Fixed (non-learnable) sparse or dense operator applied on the left."""
    x = as_tensor(x)
    if S.shape[1] != x.value.shape[-2]:
        raise ShapeMismatch(f"operator {S.shape} vs signal {x.shape}")
    if symmetric:
        ST = S
    else:
        ST = S.T.tocsr() if sp.issparse(S) else S.T
    return record(_apply_left(S, x.value), (x,), lambda g: (_apply_left(ST, g),))


class SetPattern:
    """Index arrays for a sparse neighbourhood pattern in CSR order."""

    def __init__(self, pattern: sp.csr_matrix):
        pattern = sp.csr_matrix(pattern)
        pattern.sort_indices()
        self.n = pattern.shape[0]
        self.indptr = pattern.indptr.astype(np.int64)
        self.cols = pattern.indices.astype(np.int64)
        counts = np.diff(self.indptr)
        self.rows = np.repeat(np.arange(self.n), counts)
        self.nnz = self.cols.size
        self.empty_rows = np.flatnonzero(counts == 0)
        ones = np.ones(self.nnz)
        k = np.arange(self.nnz)
        self.row_scatter = sp.csr_matrix((ones, (self.rows, k)), shape=(self.n, self.nnz))
        self.col_scatter = sp.csr_matrix((ones, (self.cols, k)), shape=(self.n, self.nnz))
        self._blocks: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def matrix(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((values, self.cols, self.indptr), shape=(self.n, self.n))

    def block_matrix(self, values: np.ndarray) -> sp.csr_matrix:
        """Block-diagonal CSR over a batch; ``values`` is ``[B, nnz]``."""
        B = values.shape[0]
        if B not in self._blocks:
            offs = np.arange(B, dtype=np.int64)
            cols = (self.cols[None, :] + self.n * offs[:, None]).reshape(-1)
            indptr = np.concatenate([[0], (self.indptr[1:][None, :] + self.nnz * offs[:, None]).reshape(-1)])
            self._blocks[B] = (cols, indptr)
        cols, indptr = self._blocks[B]
        N = B * self.n
        return sp.csr_matrix((values.reshape(-1), cols, indptr), shape=(N, N))

    def segment_sum(self, v: np.ndarray) -> np.ndarray:
        """Sum entries of ``v[..., nnz]`` row by row -> ``[..., n]``."""
        return _scatter_last(self.row_scatter, v)


def _scatter_last(M: sp.csr_matrix, v: np.ndarray) -> np.ndarray:
    lead = v.shape[:-1]
    flat = v.reshape(-1, v.shape[-1])
    return np.asarray(M @ flat.T).T.reshape(lead + (M.shape[0],))


def pair_scores(src, dst, pattern: SetPattern) -> Tensor:
    """``out[..., k] = src[..., row_k] + dst[..., col_k]`` on the pattern entries."""
    src, dst = as_tensor(src), as_tensor(dst)
    if src.value.shape[-1] != pattern.n or dst.value.shape[-1] != pattern.n:
        raise ShapeMismatch("score vectors must have one entry per simplex")
    out = src.value[..., pattern.rows] + dst.value[..., pattern.cols]

    def back(g):
        return _scatter_last(pattern.row_scatter, g), _scatter_last(pattern.col_scatter, g)

    return record(out, (src, dst), back)


def softmax_over_sets(scores, pattern: SetPattern) -> Tensor:
    """Row-wise softmax of pattern-indexed scores ``[..., nnz]``."""
    scores = as_tensor(scores)
    if pattern.empty_rows.size:
        raise EmptyNeighborhood(f"simplices {pattern.empty_rows[:5].tolist()} have no neighbours")
    S = scores.value
    seg_max = np.maximum.reduceat(S, pattern.indptr[:-1], axis=-1)
    ex = np.exp(S - seg_max[..., pattern.rows])
    denom = pattern.segment_sum(ex)
    alpha = ex / denom[..., pattern.rows]

    def back(g):
        dot = pattern.segment_sum(g * alpha)
        return (alpha * (g - dot[..., pattern.rows]),)

    return record(alpha, (scores,), back)


DENSE_PAIR_RATIO = 128
DENSE_PAIR_MAX = 2 ** 24  # cap on the B*n*n scratch array


def attention_matmul(pattern: SetPattern, alpha, x) -> Tensor:
    """Apply the sparse matrix with pattern entries ``alpha`` to ``x``.

    ``alpha`` is ``[..., nnz]`` and ``x`` is ``[..., n, F]`` with matching
    leading axes.
    """
    alpha, x = as_tensor(alpha), as_tensor(x)
    A, X = alpha.value, x.value
    if X.shape[-2] != pattern.n or A.shape[-1] != pattern.nnz or A.shape[:-1] != X.shape[:-2]:
        raise ShapeMismatch(f"attention {A.shape} vs features {X.shape}")
    lead = X.shape[:-2]
    Af = A.reshape(-1, pattern.nnz)
    B, fw = Af.shape[0], X.shape[-1]
    Xf = X.reshape(B, pattern.n, fw)
    M = pattern.block_matrix(Af)
    out = (M @ Xf.reshape(-1, fw)).reshape(lead + (pattern.n, fw))

    def back(g):
        gf = g.reshape(B, pattern.n, fw)
        gx = None
        if x.requires_grad:
            gx = (M.T @ gf.reshape(-1, fw)).reshape(X.shape)
        ga = None
        if alpha.requires_grad:
            pairs = pattern.n * pattern.n
            if pairs <= DENSE_PAIR_RATIO * pattern.nnz and B * pairs <= DENSE_PAIR_MAX:
                # all pairwise products via BLAS, then pick the pattern entries
                ga = (gf @ _swap(Xf))[:, pattern.rows, pattern.cols]
            else:
                ga = np.einsum("bkf,bkf->bk", gf[:, pattern.rows, :], Xf[:, pattern.cols, :])
            ga = ga.reshape(A.shape)
        return ga, gx

    return record(out, (alpha, x), back)
