"""Hodge decomposition of simplicial signals and harmonic projectors."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import DimensionMismatch, EigenFailure, EpsilonOutOfRange

POWER_ITERS = 1000
POWER_TOL = 1e-8
LAMBDA_SAFETY = 1.01
CG_RTOL = 1e-12
DENSE_FILL = 0.5


@dataclass(frozen=True)
class HodgeParts:
    irrotational: np.ndarray
    solenoidal: np.ndarray
    harmonic: np.ndarray

    def total(self) -> np.ndarray:
        return self.irrotational + self.solenoidal + self.harmonic


@dataclass(frozen=True)
class ProjectorSpec:
    """Step ``epsilon`` and power ``j_h`` of the sparse harmonic projector."""

    epsilon: float
    j_h: int

    def __post_init__(self):
        if self.j_h < 0:
            raise ValueError("j_h must be non-negative")
        if not self.epsilon > 0:
            raise EpsilonOutOfRange(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class SpectralBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    harmonic_dim: int

    @property
    def harmonic_basis(self) -> np.ndarray:
        return self.eigenvectors[:, :self.harmonic_dim]


def _as_operator(M):
    return M if sp.issparse(M) else np.asarray(M, dtype=float)


def lambda_max(L, iters: int = POWER_ITERS, tol: float = POWER_TOL) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Stops once the residual ``||L x - lam x||`` drops below ``tol * lam``;
    a Rayleigh quotient never exceeds the true value. The start vector is
    fixed so the estimate is reproducible.
    """
    L = _as_operator(L)
    n = L.shape[0]
    if n == 0:
        return 0.0
    x = 1.0 + 0.1 * np.cos(np.arange(n) * 1.2345)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = L @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        lam = float(x @ y)
        if np.linalg.norm(y - lam * x) <= tol * max(abs(lam), 1.0):
            break
        x = y / ny
    return lam


def admissible_epsilon(L) -> float:
    """Upper bound ``2 / lambda_max`` with lambda_max inflated by 1%."""
    lam = LAMBDA_SAFETY * lambda_max(L)
    return np.inf if lam == 0 else 2.0 / lam


def spectral_basis(L, zero_tol: float | None = None) -> SpectralBasis:
    A = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
    if A.shape[0] == 0:
        return SpectralBasis(np.zeros(0), np.zeros((0, 0)), 0)
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if zero_tol is None:
        zero_tol = 1e-8 * max(float(w[-1]), 1.0)
    return SpectralBasis(w, U, int(np.sum(w < zero_tol)))


def exact_harmonic_projector(L, zero_tol: float | None = None) -> np.ndarray:
    """Dense orthogonal projector onto ker(L)."""
    basis = spectral_basis(L, zero_tol)
    U = basis.harmonic_basis
    return U @ U.T


def sparse_harmonic_projector(L, spec: ProjectorSpec, check: bool = True):
    """``(I - eps L) ** j_h`` by repeated sparse products.

    Returns CSR while the fill stays under 50%, otherwise a dense array.
    """
    L = sp.csr_matrix(L, dtype=float)
    n = L.shape[0]
    if check and spec.epsilon > admissible_epsilon(L):
        raise EpsilonOutOfRange(
            f"epsilon={spec.epsilon} exceeds 2/lambda_max ~ {admissible_epsilon(L):.6g}"
        )
    step = (sp.identity(n, format="csr") - spec.epsilon * L).tocsr()
    P = sp.identity(n, format="csr", dtype=float)
    dense = False
    for _ in range(spec.j_h):
        P = step @ P
        if not dense and P.nnz > DENSE_FILL * n * n:
            P = P.toarray()
            dense = True
    if not dense:
        P = sp.csr_matrix(P)
        P.sum_duplicates()
        P.eliminate_zeros()
        P.sort_indices()
    return np.asarray(P) if dense else P


def clamp_epsilon(L, epsilon: float) -> float:
    """Return ``epsilon`` or the admissible bound if it is exceeded (with a warning)."""
    bound = admissible_epsilon(L)
    if epsilon > bound:
        warnings.warn(
            f"epsilon={epsilon} exceeds estimated bound {bound:.4g}; clamping",
            stacklevel=2,
        )
        return bound
    return epsilon


def _range_projection(B, x: np.ndarray) -> np.ndarray:
    """Project x onto im(B) through CG on the normal equations B^T B z = B^T x."""
    if B is None or B.shape[1] == 0:
        return np.zeros_like(x)
    rhs = B.T @ x
    if not np.any(rhs):
        return np.zeros_like(x)
    G = (B.T @ B).tocsr()
    z, info = cg(G, rhs, rtol=CG_RTOL, atol=0.0, maxiter=10 * G.shape[0] + 100)
    if info != 0:
        # singular-but-consistent systems occasionally stall just above rtol
        z = np.linalg.lstsq(G.toarray(), rhs, rcond=None)[0]
    return B @ z


def hodge_decompose(x, L_down=None, L_up=None, *, B_down=None, B_up=None) -> HodgeParts:
    """Split a k-signal into gradient, curl and harmonic parts.

    With incidence matrices ``B_down = B_k`` and ``B_up = B_{k+1}`` the
    projections go through the normal equations. With only the Laplacians,
    the column spaces of ``L_down`` and ``L_up`` are used instead (they equal
    im(B_k^T) and im(B_{k+1})).
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if B_down is None and L_down is not None:
        B_down = sp.csr_matrix(L_down, dtype=float)
    elif B_down is not None:
        B_down = sp.csr_matrix(B_down, dtype=float).T.tocsr()
    if B_up is None and L_up is not None:
        B_up = sp.csr_matrix(L_up, dtype=float)
    elif B_up is not None:
        B_up = sp.csr_matrix(B_up, dtype=float)
    for M in (B_down, B_up):
        if M is not None and M.shape[0] != n:
            raise DimensionMismatch(f"operator has {M.shape[0]} rows, signal has {n}")
    grad = _range_projection(B_down, x)
    curl = _range_projection(B_up, x)
    harm = x - grad - curl
    scale = np.linalg.norm(x)
    # components at round-off level are exactly zero
    parts = []
    for part in (grad, curl, harm):
        if np.linalg.norm(part) <= 1e-12 * scale:
            part = np.zeros_like(part)
        parts.append(part)
    return HodgeParts(*parts)


def divergence(B1, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if B1.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"B_1 has {B1.shape[1]} columns, signal has {x.shape[0]}")
    return np.asarray(B1 @ x, dtype=float)


def curl(B2, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if B2.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"B_2 has {B2.shape[0]} rows, signal has {x.shape[0]}")
    return np.asarray(B2.T @ x, dtype=float)
