"""Oriented simplicial complexes, incidence matrices and Hodge Laplacians.

Simplices are stored as ascending vertex tuples; the ascending order is the
reference orientation. The face of ``(v0 < ... < vk)`` obtained by dropping
``vj`` enters the boundary with sign ``(-1)**j``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DuplicateVertex, EmptyInput, OrderOutOfRange

Simplex = tuple[int, ...]


def make_simplex(vertices: Iterable[int]) -> Simplex:
    """Canonicalise a vertex collection into an ascending tuple."""
    verts = [int(v) for v in vertices]
    if not verts:
        raise EmptyInput("simplex needs at least one vertex")
    if any(v < 0 for v in verts):
        raise ValueError(f"vertex ids must be non-negative: {verts}")
    out = tuple(sorted(verts))
    if len(set(out)) != len(out):
        raise DuplicateVertex(f"repeated vertex in {verts}")
    return out


def faces(simplex: Simplex) -> list[Simplex]:
    """(k-1)-faces in boundary order: entry j omits vertex j."""
    return [simplex[:j] + simplex[j + 1:] for j in range(len(simplex))]


@dataclass(frozen=True)
class NeighborhoodTable:
    """Self-inclusive upper/lower neighbourhoods of the k-simplices.

    ``upper`` and ``lower`` are CSR boolean patterns; row i lists the
    neighbours of simplex i in ascending index order.
    """

    order: int
    upper: sp.csr_matrix
    lower: sp.csr_matrix
    self_inclusive: bool = True

    def upper_of(self, i: int) -> list[int]:
        return self.upper.indices[self.upper.indptr[i]:self.upper.indptr[i + 1]].tolist()

    def lower_of(self, i: int) -> list[int]:
        return self.lower.indices[self.lower.indptr[i]:self.lower.indptr[i + 1]].tolist()


class SimplicialComplex:
    """Immutable simplicial complex closed under taking faces."""

    def __init__(self, simplices_by_order: Sequence[Sequence[Simplex]]):
        self._simplices = tuple(tuple(level) for level in simplices_by_order)
        self._index = tuple({s: i for i, s in enumerate(level)} for level in self._simplices)
        self._cache: dict = {}

    # -- structure ---------------------------------------------------------
    @property
    def max_order(self) -> int:
        return len(self._simplices) - 1

    def simplices(self, k: int) -> tuple[Simplex, ...]:
        if k < 0:
            raise OrderOutOfRange(f"order {k} < 0")
        if k > self.max_order:
            return ()
        return self._simplices[k]

    def n(self, k: int) -> int:
        return len(self.simplices(k))

    def index(self, simplex: Iterable[int]) -> int:
        s = make_simplex(simplex)
        return self._index[len(s) - 1][s]

    def __contains__(self, simplex) -> bool:
        s = tuple(sorted(simplex))
        return len(s) - 1 <= self.max_order and s in self._index[len(s) - 1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(level) for level in self._simplices)

    def top_simplices(self) -> list[Simplex]:
        """Maximal simplices: those that are not a face of another simplex."""
        covered: set[Simplex] = set()
        for level in self._simplices[1:]:
            for s in level:
                covered.update(faces(s))
        return [s for level in self._simplices for s in level if s not in covered]

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplicialComplex) and self._simplices == other._simplices

    def __hash__(self):
        return hash(self._simplices)

    def __repr__(self) -> str:
        return f"SimplicialComplex(shape={self.shape})"

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 of the canonical text serialisation."""
        from .data.io import dumps_complex

        return hashlib.sha256(dumps_complex(self).encode("utf-8")).hexdigest()

    # -- algebra -----------------------------------------------------------
    def _check_order(self, k: int, lo: int = 0) -> None:
        if k < lo or k > self.max_order:
            raise OrderOutOfRange(f"order {k} outside [{lo}, {self.max_order}]")

    def incidence(self, k: int) -> sp.csr_matrix:
        """Integer boundary matrix B_k of shape (N_{k-1}, N_k)."""
        self._check_order(k, lo=1)
        key = ("B", k)
        if key not in self._cache:
            lower = self._index[k - 1]
            rows, cols, vals = [], [], []
            for j, s in enumerate(self._simplices[k]):
                for pos, f in enumerate(faces(s)):
                    rows.append(lower[f])
                    cols.append(j)
                    vals.append(1 if pos % 2 == 0 else -1)
            B = sp.csr_matrix(
                (np.array(vals, dtype=np.int64), (rows, cols)),
                shape=(self.n(k - 1), self.n(k)),
            )
            B.sort_indices()
            self._cache[key] = B
        return self._cache[key]

    def laplacians(self, k: int) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
        """(L_down, L_up, L) at order k as float64 CSR matrices."""
        self._check_order(k)
        key = ("L", k)
        if key not in self._cache:
            n = self.n(k)
            zero = sp.csr_matrix((n, n), dtype=np.int64)
            if k >= 1:
                Bk = self.incidence(k)
                down = (Bk.T @ Bk).tocsr()
            else:
                down = zero
            if k < self.max_order and self.n(k + 1) > 0:
                Bk1 = self.incidence(k + 1)
                up = (Bk1 @ Bk1.T).tocsr()
            else:
                up = zero
            mats = []
            for M in (down, up, down + up):
                M = sp.csr_matrix(M, dtype=np.float64)
                M.eliminate_zeros()
                M.sort_indices()
                mats.append(M)
            self._cache[key] = tuple(mats)
        return self._cache[key]

    def neighborhoods(self, k: int) -> NeighborhoodTable:
        self._check_order(k)
        key = ("N", k)
        if key not in self._cache:
            down, up, _ = self.laplacians(k)
            eye = sp.identity(self.n(k), format="csr", dtype=bool)

            def pattern(M):
                P = (M != 0).astype(bool) + eye
                P = sp.csr_matrix(P, dtype=bool)
                P.sort_indices()
                return P

            self._cache[key] = NeighborhoodTable(k, upper=pattern(up), lower=pattern(down))
        return self._cache[key]


def build_complex(top_simplices: Iterable[Iterable[int]]) -> SimplicialComplex:
    """Close a list of simplices under faces and order every level lexicographically."""
    tops = [make_simplex(s) for s in top_simplices]
    if not tops:
        raise EmptyInput("no simplices given")
    K = max(len(s) for s in tops) - 1
    levels: list[set[Simplex]] = [set() for _ in range(K + 1)]
    for s in tops:
        for r in range(1, len(s) + 1):
            levels[r - 1].update(combinations(s, r))
    return SimplicialComplex([sorted(level) for level in levels])


def incidence_matrix(X: SimplicialComplex, k: int) -> sp.csr_matrix:
    """Signed incidence B_k in floating point, shape (N_{k-1}, N_k)."""
    if k < 1 or k > X.max_order or X.n(k) == 0:
        raise OrderOutOfRange(f"no incidence matrix at order {k}")
    return sp.csr_matrix(X.incidence(k), dtype=np.float64)


def laplacian(X: SimplicialComplex, k: int):
    """Return ``(L_down, L_up, L)`` for order k."""
    return X.laplacians(k)


def neighborhoods(X: SimplicialComplex, k: int) -> NeighborhoodTable:
    return X.neighborhoods(k)


def betti_numbers_graph(X: SimplicialComplex) -> int:
    """First Betti number of the 1-skeleton, ``E - V + components``."""
    V, E = X.n(0), X.n(1)
    if E == 0:
        return 0
    B1 = abs(X.incidence(1))
    A = (B1 @ B1.T).tocsr()
    n_comp, _ = connected_components(A, directed=False)
    return E - V + n_comp
