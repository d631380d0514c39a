"""Leading spectral structure of symmetric weight matrices.

Provides the truncated eigendecomposition ordered by absolute eigenvalue,
orthogonal Procrustes alignment between orthonormal frames, and the scaled
subspace distances that the two-sample statistic is built from.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError, ValidationError
from .model import check_weight_matrix

__all__ = [
    "SpectralTopK",
    "top_k_spectrum",
    "procrustes",
    "alignment_matrix",
    "sin_theta_frobenius",
    "scaled_subspace_statistic",
    "linear_term",
]

# fixed start block for the iterative path keeps results call-order independent
_SUBSPACE_SEED = 0x5EED1E5
_DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralTopK:
    """Leading-K eigenpairs of a symmetric matrix, ordered by |eigenvalue|.

    ``values`` keep their signs; ``vectors`` has orthonormal columns.
    ``residual_top`` is |lambda_{K+1}| (exact under the dense solver, a
    Rayleigh-Ritz estimate under the iterative one). ``degenerate`` flags a
    tie |lambda_K| ~ |lambda_{K+1}|, where the leading subspace is not
    unique.
    """

    values: np.ndarray
    vectors: np.ndarray
    residual_top: float
    degenerate: bool

    @property
    def K(self) -> int:
        return self.values.size


def _order_by_abs(values: np.ndarray) -> np.ndarray:
    # descending |value|, ties broken by descending signed value
    return np.lexsort((-values, -np.abs(values)))


def _dense_top_k(W: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray, float]:
    vals, vecs = np.linalg.eigh(W)
    order = _order_by_abs(vals)
    lead = order[:K]
    return vals[lead], vecs[:, lead], float(abs(vals[order[K]]))


def _subspace_top_k(
    W: np.ndarray, K: int, tol: float, max_iter: int, extra: int
) -> Optional[tuple[np.ndarray, np.ndarray, float]]:
    """Block subspace iteration for the K largest-|.| eigenpairs.

    Rayleigh-Ritz each sweep; converged when the top-K residual norms fall
    below tol * |theta_1|. Returns None if the gap is too small to converge
    within max_iter (caller falls back to a dense solve).
    """
    n = W.shape[0]
    p = min(n, K + 1 + extra)
    X = np.random.default_rng(_SUBSPACE_SEED).standard_normal((n, p))
    X, _ = np.linalg.qr(X)
    for _ in range(max_iter):
        Y = W @ X
        theta, S = np.linalg.eigh(X.T @ Y)
        order = _order_by_abs(theta)
        theta, S = theta[order], S[:, order]
        V = X @ S
        WV = Y @ S
        resid = np.linalg.norm(WV[:, :K] - V[:, :K] * theta[:K], axis=0)
        top = max(abs(theta[0]), 1e-300)
        if np.all(resid <= tol * top):
            return theta[:K], V[:, :K], float(abs(theta[K])) if p > K else 0.0
        X, _ = np.linalg.qr(WV)
    return None


def top_k_spectrum(
    graph: np.ndarray,
    K: int,
    *,
    dense_cutoff: int = 512,
    tol: float = 1e-9,
    max_iter: int = 100,
    extra: int = 5,
) -> SpectralTopK:
    """Leading-K eigenpairs of a symmetric matrix by decreasing |eigenvalue|.

    Small matrices (n <= dense_cutoff) use a full dense eigendecomposition.
    Larger ones use block subspace iteration, which is exact to ``tol`` when
    the spectrum has a gap below the K-th value and falls back to the dense
    solver otherwise. Results are deterministic up to per-column sign and
    rotation inside degenerate eigenspaces.
    """
    W = check_weight_matrix(np.asarray(graph, dtype=np.float64), "spectrum input")
    n = W.shape[0]
    if not 1 <= K < n:
        raise DomainError(f"need 1 <= K < n, got K={K}, n={n}")
    if n <= dense_cutoff or K + 1 + extra >= n:
        vals, vecs, resid_top = _dense_top_k(W, K)
    else:
        out = _subspace_top_k(W, K, tol, max_iter, extra)
        if out is None:
            vals, vecs, resid_top = _dense_top_k(W, K)
        else:
            vals, vecs, resid_top = out
    degenerate = abs(abs(vals[-1]) - resid_top) <= _DEGENERACY_TOL
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralTopK(vals, vecs, resid_top, bool(degenerate))


def _check_frame(V: np.ndarray, name: str) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValidationError(f"{name} must be a 2-d array")
    G = V.T @ V
    if not np.allclose(G, np.eye(V.shape[1]), atol=1e-6):
        raise ValidationError(f"{name} must have orthonormal columns")
    return V


def procrustes(V1: np.ndarray, V2: np.ndarray) -> np.ndarray:
    """The orthogonal K x K matrix U minimizing ||V1 U - V2||_F.

    Standard construction: with V1^T V2 = A S B^T, the minimizer is A B^T.
    When V1^T V2 is rank deficient the minimizer is not unique; a valid one
    is still returned and a warning is emitted.
    """
    V1 = _check_frame(V1, "V1")
    V2 = _check_frame(V2, "V2")
    if V1.shape != V2.shape:
        raise DimensionError(f"frame shapes differ: {V1.shape} vs {V2.shape}")
    A, s, Bt = np.linalg.svd(V1.T @ V2)
    if s.size and s[-1] <= 1e-10 * max(s[0], 1e-300):
        warnings.warn("V1^T V2 is rank deficient; Procrustes minimizer is not unique", stacklevel=2)
    return A @ Bt


def alignment_matrix(V1: np.ndarray, V2: np.ndarray, method: str = "procrustes") -> np.ndarray:
    """Alignment of V1 toward V2: ``procrustes`` (default, used by the test)
    or the diagnostic variants ``projection`` (V1^T V2) and ``inverse``
    ((V2^T V1)^{-1})."""
    if method == "procrustes":
        return procrustes(V1, V2)
    V1 = _check_frame(V1, "V1")
    V2 = _check_frame(V2, "V2")
    if V1.shape != V2.shape:
        raise DimensionError(f"frame shapes differ: {V1.shape} vs {V2.shape}")
    if method == "projection":
        return V1.T @ V2
    if method == "inverse":
        return np.linalg.inv(V2.T @ V1)
    raise DomainError(f"unknown alignment method {method!r}")


def sin_theta_frobenius(V1: np.ndarray, V2: np.ndarray) -> float:
    """Frobenius sin-theta distance: ||V1 P(V1,V2) - V2||_F, in [0, sqrt(2K)]."""
    return float(np.linalg.norm(V1 @ procrustes(V1, V2) - V2))


def scaled_subspace_statistic(
    V1: np.ndarray,
    V2: np.ndarray,
    lambda2: np.ndarray,
    n: Optional[int] = None,
    K: Optional[int] = None,
    transform: str = "procrustes",
) -> float:
    """The two-sample statistic (1/(nK)) ||(V1 U - V2) diag(lambda2)||_F^2.

    ``lambda2`` are the leading eigenvalues of the second matrix, paired
    with V2's columns; U aligns V1 toward V2 (Procrustes by default).
    """
    V1 = np.asarray(V1, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    lambda2 = np.asarray(lambda2, dtype=np.float64)
    if V1.shape != V2.shape:
        raise DimensionError(f"frame shapes differ: {V1.shape} vs {V2.shape}")
    if lambda2.shape != (V2.shape[1],):
        raise DimensionError(
            f"lambda2 must have {V2.shape[1]} entries, got shape {lambda2.shape}"
        )
    n = V1.shape[0] if n is None else n
    K = V1.shape[1] if K is None else K
    if (n, K) != V1.shape:
        raise DimensionError(f"(n, K)=({n}, {K}) inconsistent with frames of shape {V1.shape}")
    U = alignment_matrix(V1, V2, transform)
    M = (V1 @ U - V2) * lambda2[None, :]
    return float(np.sum(M * M) / (n * K))


def linear_term(W1: np.ndarray, W2: np.ndarray, gamma: float, VE2: np.ndarray) -> float:
    """The dominant expansion term (1/(nK)) ||(gamma W1 - W2) V_E2||_F^2."""
    W1 = np.asarray(W1, dtype=np.float64)
    W2 = np.asarray(W2, dtype=np.float64)
    VE2 = np.asarray(VE2, dtype=np.float64)
    if W1.shape != W2.shape or W1.ndim != 2 or W1.shape[0] != W1.shape[1]:
        raise DimensionError(f"weight matrices must be square and equal-shaped, got {W1.shape} vs {W2.shape}")
    if VE2.ndim != 2 or VE2.shape[0] != W1.shape[0]:
        raise DimensionError(f"VE2 rows must match n={W1.shape[0]}, got shape {VE2.shape}")
    n, K = VE2.shape
    M = (gamma * W1 - W2) @ VE2
    return float(np.sum(M * M) / (n * K))
