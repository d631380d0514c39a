"""Community recovery by spectral clustering and label-space distances.

k-means (k-means++ seeding, multiple restarts) on the rows of a spectral
embedding of the weight matrix, plus the permutation-minimal Hamming
distance between partitions and a controlled way to plant a partition at a
prescribed distance from another.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ClusteringError, DimensionError, DomainError
from .model import Membership, check_weight_matrix
from .spectral import top_k_spectrum

__all__ = [
    "ClusteringResult",
    "spectral_cluster",
    "kmeans_assign",
    "confusion_matrix",
    "hamming_distance",
    "plant_alternative",
]

_BRUTE_FORCE_MAX_K = 8
_KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ClusteringResult:
    """Best-of-restarts k-means assignment on a spectral embedding."""

    membership: Membership
    inertia: float
    restarts_used: int
    embedding: str


def _kmeans_once(X: np.ndarray, K: int, rng: np.random.Generator) -> tuple[np.ndarray, float] | None:
    """One k-means run with k-means++ seeding; None if a cluster emptied."""
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, K):
        total = closest.sum()
        if total <= 0:
            # all points coincide with chosen centers; any index works
            centers[j] = X[rng.integers(n)]
            continue
        centers[j] = X[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, np.sum((X - centers[j]) ** 2, axis=1))
    labels = None
    for _ in range(_KMEANS_MAX_ITER):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=K)
        if np.any(counts == 0):
            return None
        for j in range(K):
            centers[j] = X[labels == j].mean(axis=0)
    inertia = float(np.sum((X - centers[labels]) ** 2))
    return labels, inertia


def kmeans_assign(X: np.ndarray, K: int, seed: int = 0, restarts: int = 20) -> np.ndarray:
    """Best-inertia k-means labels (1..K) over ``restarts`` seeded runs.

    Restart r uses an independent stream derived from (seed, r); ties in
    inertia keep the lowest restart index, so the result is deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < K:
        raise DomainError(f"need at least K={K} rows to cluster, got shape {X.shape}")
    if K == 1:
        return np.ones(X.shape[0], dtype=np.int64)
    best = None
    for r in range(max(restarts, 1)):
        out = _kmeans_once(X, K, np.random.default_rng([seed, r]))
        if out is None:
            continue
        labels, inertia = out
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    if best is None:
        raise ClusteringError(
            f"k-means produced an empty cluster in all {restarts} restarts"
        )
    return best[0].astype(np.int64) + 1


def spectral_cluster(
    graph: np.ndarray,
    K: int,
    embedding: str = "adjacency_svd",
    seed: int = 0,
    restarts: int = 20,
    row_normalize: bool = False,
) -> ClusteringResult:
    """Recover a K-way partition from the leading eigenvectors of the graph.

    ``embedding`` selects the matrix whose top-K eigenvectors form the n x K
    embedding rows: the weight matrix itself (``adjacency_svd``) or the
    symmetrically normalized laplacian-style form D^{-1/2} W D^{-1/2}
    (``normalized_laplacian``; requires every node degree > 0).
    """
    W = check_weight_matrix(graph, "graph")
    n = W.shape[0]
    if not 1 <= K < n:
        raise DomainError(f"need 1 <= K < n, got K={K}, n={n}")
    if embedding == "adjacency_svd":
        M = W
    elif embedding == "normalized_laplacian":
        deg = W.sum(axis=1)
        if np.any(deg <= 0):
            bad = int(np.argmax(deg <= 0))
            raise DomainError(f"node {bad} has degree {deg[bad]:.6g}; laplacian embedding needs all degrees > 0")
        inv_sqrt = 1.0 / np.sqrt(deg)
        M = W * inv_sqrt[:, None] * inv_sqrt[None, :]
    else:
        raise DomainError(f"unknown embedding {embedding!r}")
    X = np.asarray(top_k_spectrum(M, K).vectors)
    if row_normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        X = X / norms
    if K == 1:
        labels = np.ones(n, dtype=np.int64)
        inertia = float(np.sum((X - X.mean(axis=0)) ** 2))
        return ClusteringResult(Membership(labels), inertia, 1, embedding)
    labels = kmeans_assign(X, K, seed=seed, restarts=restarts)
    centers = np.stack([X[labels == k].mean(axis=0) for k in range(1, K + 1)])
    inertia = float(np.sum((X - centers[labels - 1]) ** 2))
    return ClusteringResult(Membership(labels), inertia, restarts, embedding)


def confusion_matrix(m1: Membership, m2: Membership) -> np.ndarray:
    """K x K counts: entry (a, b) is #{i : m1(i) = a+1 and m2(i) = b+1}."""
    if m1.n != m2.n:
        raise DimensionError(f"memberships cover different node counts: {m1.n} vs {m2.n}")
    if m1.K != m2.K:
        raise DomainError(f"memberships disagree on K: {m1.K} vs {m2.K}")
    C = np.zeros((m1.K, m1.K), dtype=np.int64)
    np.add.at(C, (m1.labels - 1, m2.labels - 1), 1)
    return C


def _max_agreement(C: np.ndarray, method: str) -> int:
    K = C.shape[0]
    if method == "brute":
        perms = np.array(list(itertools.permutations(range(K))))
        return int(C[np.arange(K), perms].sum(axis=1).max())
    if method == "assignment":
        rows, cols = linear_sum_assignment(-C)
        return int(C[rows, cols].sum())
    raise DomainError(f"unknown hamming method {method!r}")


def hamming_distance(m1: Membership, m2: Membership, method: str = "auto") -> float:
    """Fraction of nodes mislabelled under the best permutation of m2's labels.

    Exact for every K: brute force over all K! permutations when K <= 8
    (``method="auto"``), optimal assignment on the confusion matrix
    otherwise. Both routes can be forced for cross-checking.
    """
    C = confusion_matrix(m1, m2)
    if method == "auto":
        method = "brute" if m1.K <= _BRUTE_FORCE_MAX_K else "assignment"
    return (m1.n - _max_agreement(C, method)) / m1.n


def plant_alternative(m: Membership, ell: float, seed, max_tries: int = 100) -> Membership:
    """A membership at permutation-minimal Hamming distance round(ell*n)/n from m.

    Moves that many uniformly chosen nodes to uniformly chosen different
    labels, then verifies post hoc that no block emptied and that the
    minimal-permutation distance equals the target exactly; infeasible
    targets fail after ``max_tries`` redraws.
    """
    if not 0.0 <= ell <= 1.0:
        raise DomainError(f"ell must be in [0, 1], got {ell}")
    n, K = m.n, m.K
    moves = int(np.floor(ell * n + 0.5))
    if moves == 0:
        return m
    if K < 2:
        raise DomainError("cannot plant an alternative with K=1")
    rng = np.random.default_rng(seed)
    method = "brute" if K <= _BRUTE_FORCE_MAX_K else "assignment"
    for _ in range(max_tries):
        labels = m.labels.copy()
        idx = rng.choice(n, size=moves, replace=False)
        shift = rng.integers(1, K, size=moves)
        labels[idx] = (labels[idx] - 1 + shift) % K + 1
        counts = np.bincount(labels, minlength=K + 1)[1:]
        if np.any(counts == 0):
            continue
        cand = Membership(labels)
        mismatches = n - _max_agreement(confusion_matrix(m, cand), method)
        if mismatches == moves:
            return cand
    raise DomainError(
        f"could not realize Hamming distance {moves / n:.6g} from the given membership "
        f"in {max_tries} tries (target may be infeasible)"
    )
