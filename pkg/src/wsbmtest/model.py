"""Homogeneous weighted stochastic block models.

A model is a node partition plus two edge-weight distributions: one shared by
all within-block pairs and one shared by all between-block pairs. This module
defines those pieces, samples symmetric zero-diagonal weight matrices from
them, and computes the population quantities (expected weight matrix, block
mean matrix, Renyi separation, SNR) used by the inference layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, UnsupportedLawError, ValidationError

__all__ = [
    "WeightLaw",
    "Membership",
    "BlockModelSpec",
    "sample_graph",
    "expectation_matrix",
    "block_mean_matrix",
    "renyi_half_divergence",
    "renyi_region_statistic",
    "snr",
    "check_weight_matrix",
]

_CUSTOM_CHECK_DRAWS = 10_000
_CUSTOM_CHECK_SIGMAS = 5.0


@dataclass(frozen=True)
class WeightLaw:
    """An edge-weight distribution with known mean and variance.

    Use the constructors (:meth:`bernoulli`, :meth:`chi_square`,
    :meth:`gaussian`, :meth:`custom`) rather than instantiating directly;
    they fill in the analytic moments and support.
    """

    kind: str
    params: tuple
    mean: float
    variance: float
    support: tuple[float, float]
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = field(
        default=None, repr=False, compare=False
    )

    @classmethod
    def bernoulli(cls, p: float) -> "WeightLaw":
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"bernoulli parameter must be in [0, 1], got {p}")
        return cls("bernoulli", (float(p),), float(p), float(p * (1.0 - p)), (0.0, 1.0))

    @classmethod
    def chi_square(cls, df: float) -> "WeightLaw":
        if df <= 0:
            raise ValidationError(f"chi-square degrees of freedom must be > 0, got {df}")
        return cls("chi_square", (float(df),), float(df), float(2.0 * df), (0.0, math.inf))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "WeightLaw":
        if sd < 0:
            raise ValidationError(f"gaussian sd must be >= 0, got {sd}")
        return cls("gaussian", (float(mean), float(sd)), float(mean), float(sd**2), (-math.inf, math.inf))

    @classmethod
    def custom(
        cls,
        mean: float,
        variance: float,
        sampler: Callable[[np.random.Generator, int], np.ndarray],
        support: tuple[float, float] = (-math.inf, math.inf),
        check_seed: int = 0,
    ) -> "WeightLaw":
        """A user-defined law with declared moments.

        The declaration is verified against 10^4 draws of ``sampler`` at
        construction (within 5 standard errors); draws must stay inside
        ``support``.
        """
        if variance < 0:
            raise ValidationError(f"declared variance must be >= 0, got {variance}")
        law = cls("custom", (float(mean), float(variance)), float(mean), float(variance), support, sampler)
        law._moment_check(check_seed)
        return law

    def _moment_check(self, seed: int) -> None:
        draws = np.asarray(self.sampler(np.random.default_rng(seed), _CUSTOM_CHECK_DRAWS), dtype=float)
        if draws.shape != (_CUSTOM_CHECK_DRAWS,):
            raise ValidationError("custom sampler must return a 1-d array of the requested size")
        lo, hi = self.support
        if draws.min() < lo or draws.max() > hi:
            raise ValidationError(
                f"custom sampler produced values outside declared support [{lo}, {hi}]"
            )
        m = draws.mean()
        s2 = draws.var(ddof=1)
        n = draws.size
        se_mean = math.sqrt(s2 / n) if s2 > 0 else 0.0
        # asymptotic SE of the sample variance via the fourth central moment
        m4 = np.mean((draws - m) ** 4)
        se_var = math.sqrt(max(m4 - s2**2, 0.0) / n)
        if abs(m - self.mean) > _CUSTOM_CHECK_SIGMAS * max(se_mean, 1e-15):
            raise ValidationError(
                f"custom law declared mean {self.mean} but sampled mean {m:.6g} "
                f"(> {_CUSTOM_CHECK_SIGMAS} SE)"
            )
        if abs(s2 - self.variance) > _CUSTOM_CHECK_SIGMAS * max(se_var, 1e-15):
            raise ValidationError(
                f"custom law declared variance {self.variance} but sampled variance {s2:.6g} "
                f"(> {_CUSTOM_CHECK_SIGMAS} SE)"
            )

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "bernoulli":
            return (rng.random(size) < self.params[0]).astype(np.float64)
        if self.kind == "chi_square":
            return rng.chisquare(self.params[0], size)
        if self.kind == "gaussian":
            return rng.normal(self.params[0], self.params[1], size)
        if self.kind == "custom":
            return np.asarray(self.sampler(rng, size), dtype=np.float64)
        raise UnsupportedLawError(f"unknown law kind {self.kind!r}")

    def scale_mean(self, gamma: float) -> "WeightLaw":
        """The law with mean multiplied by ``gamma`` (second-view construction).

        For bernoulli this rescales the success probability (which must stay
        <= 1); for chi-square the degrees of freedom; for gaussian the mean
        with sd unchanged. Variances therefore do not scale exactly by
        gamma^2 except in the gaussian-mean-only sense; the plug-in moment
        estimator absorbs this.
        """
        if gamma <= 0:
            raise DomainError(f"scale factor must be > 0, got {gamma}")
        if self.kind == "bernoulli":
            p = self.params[0] * gamma
            if p > 1.0:
                raise ValidationError(f"scaled bernoulli parameter {p:.6g} exceeds 1")
            return WeightLaw.bernoulli(p)
        if self.kind == "chi_square":
            return WeightLaw.chi_square(self.params[0] * gamma)
        if self.kind == "gaussian":
            return WeightLaw.gaussian(self.params[0] * gamma, self.params[1])
        raise UnsupportedLawError(f"cannot mean-scale a {self.kind!r} law")

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise UnsupportedLawError("custom laws are not serializable")
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightLaw":
        kind = d["kind"]
        params = d["params"]
        if kind == "bernoulli":
            return cls.bernoulli(*params)
        if kind == "chi_square":
            return cls.chi_square(*params)
        if kind == "gaussian":
            return cls.gaussian(*params)
        raise UnsupportedLawError(f"cannot deserialize law kind {kind!r}")


@dataclass(frozen=True)
class Membership:
    """A partition of nodes 0..n-1 into communities labelled 1..K."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a nonempty 1-d sequence")
        k = int(labels.max(initial=0))
        if labels.min(initial=1) < 1 or k < 1:
            raise ValidationError("labels must take values in {1..K}")
        counts = np.bincount(labels, minlength=k + 1)[1:]
        if np.any(counts == 0):
            empty = [i + 1 for i, c in enumerate(counts) if c == 0]
            raise ValidationError(f"every community must be nonempty; empty: {empty}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def K(self) -> int:
        return int(self.labels.max())

    @property
    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K + 1)[1:]

    @classmethod
    def from_block_sizes(cls, sizes: Sequence[int]) -> "Membership":
        """Contiguous membership: the first sizes[0] nodes get label 1, etc."""
        sizes = [int(s) for s in sizes]
        if any(s <= 0 for s in sizes):
            raise ValidationError(f"block sizes must be positive, got {sizes}")
        return cls(np.repeat(np.arange(1, len(sizes) + 1), sizes))

    @classmethod
    def balanced(cls, n: int, K: int) -> "Membership":
        if n < K:
            raise ValidationError(f"need n >= K, got n={n}, K={K}")
        base = n // K
        sizes = [base + (1 if i < n % K else 0) for i in range(K)]
        return cls.from_block_sizes(sizes)

    @classmethod
    def from_ratio(cls, n: int, ratio: Sequence[float]) -> "Membership":
        """Apportion n nodes to blocks proportional to ``ratio`` (largest remainder)."""
        r = np.asarray(ratio, dtype=float)
        if r.ndim != 1 or r.size < 1 or np.any(r <= 0):
            raise ValidationError(f"ratio must be positive, got {ratio}")
        quota = n * r / r.sum()
        sizes = np.floor(quota).astype(int)
        rem = n - sizes.sum()
        order = np.argsort(-(quota - sizes))
        sizes[order[:rem]] += 1
        if np.any(sizes == 0):
            raise ValidationError(f"n={n} too small for ratio {list(ratio)}")
        return cls.from_block_sizes(sizes)

    def onehot(self) -> np.ndarray:
        """The n x K indicator matrix with one 1 per row."""
        Z = np.zeros((self.n, self.K), dtype=np.float64)
        Z[np.arange(self.n), self.labels - 1] = 1.0
        return Z

    def orthonormal_basis(self) -> np.ndarray:
        """Z (Z^T Z)^{-1/2}: the orthonormalized indicator columns."""
        return self.onehot() / np.sqrt(self.block_sizes.astype(float))

    def relabel(self, perm: Sequence[int]) -> "Membership":
        """Apply a permutation of community labels; ``perm[k-1]`` is the new label of k."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(1, self.K + 1)):
            raise ValidationError(f"perm must be a permutation of 1..{self.K}")
        return Membership(perm[self.labels - 1])


def _min_feasible_beta(sizes: np.ndarray, n: int, K: int) -> float:
    return float(max(sizes.max() * K / n, n / (K * sizes.min())))


@dataclass(frozen=True)
class BlockModelSpec:
    """A homogeneous weighted SBM: partition, intra-block law, inter-block law.

    ``beta`` bounds the block-size imbalance: every block size must lie in
    [n/(beta K), beta n/K]. When omitted it is set to the tightest bound the
    given partition satisfies.
    """

    membership: Membership
    intra: WeightLaw
    inter: WeightLaw
    beta: Optional[float] = None

    def __post_init__(self):
        sizes = self.membership.block_sizes
        n, K = self.membership.n, self.membership.K
        if self.beta is None:
            object.__setattr__(self, "beta", _min_feasible_beta(sizes, n, K))
        elif self.beta < 1.0:
            raise ValidationError(f"beta must be >= 1, got {self.beta}")
        lo, hi = n / (self.beta * K), self.beta * n / K
        if sizes.min() < lo - 1e-9 or sizes.max() > hi + 1e-9:
            raise ValidationError(
                f"block sizes {sizes.tolist()} violate the balance bound "
                f"[{lo:.3f}, {hi:.3f}] for beta={self.beta}"
            )
        if self.intra.variance < 0 or self.inter.variance < 0:
            raise ValidationError("law variances must be nonnegative")

    @property
    def n(self) -> int:
        return self.membership.n

    @property
    def K(self) -> int:
        return self.membership.K

    def ordered(self) -> bool:
        """Whether the means satisfy the testing-regime ordering b_P > b_Q > 0."""
        return self.intra.mean > self.inter.mean > 0

    def scale_gamma(self, gamma: float) -> "BlockModelSpec":
        """The second-view model whose block mean matrix is gamma times this one's."""
        return BlockModelSpec(self.membership, self.intra.scale_mean(gamma), self.inter.scale_mean(gamma), self.beta)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "block_sizes": self.membership.block_sizes.tolist(),
            "intra": self.intra.to_dict(),
            "inter": self.inter.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "BlockModelSpec":
        sizes = d["block_sizes"]
        if "n" in d and int(d["n"]) != int(sum(sizes)):
            raise ValidationError("block_sizes must sum to n")
        if "K" in d and int(d["K"]) != len(sizes):
            raise ValidationError("block_sizes must have K entries")
        return cls(
            Membership.from_block_sizes(sizes),
            WeightLaw.from_dict(d["intra"]),
            WeightLaw.from_dict(d["inter"]),
            d.get("beta"),
        )

    @classmethod
    def from_json(cls, s: str) -> "BlockModelSpec":
        return cls.from_dict(json.loads(s))


# Per-partition boolean masks are reused heavily by the Monte Carlo loops;
# a small keyed cache avoids rebuilding 16+ MB arrays per replicate.
_MASK_CACHE: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
_MASK_CACHE_MAX = 8


def partition_masks(membership: Membership) -> tuple[np.ndarray, np.ndarray]:
    """(same_block, strict_upper) boolean n x n masks for a partition (cached)."""
    key = membership.labels.tobytes()
    hit = _MASK_CACHE.get(key)
    if hit is None:
        labels = membership.labels
        same = labels[:, None] == labels[None, :]
        triu = np.triu(np.ones((membership.n, membership.n), dtype=bool), 1)
        same.setflags(write=False)
        triu.setflags(write=False)
        if len(_MASK_CACHE) >= _MASK_CACHE_MAX:
            _MASK_CACHE.pop(next(iter(_MASK_CACHE)))
        hit = _MASK_CACHE[key] = (same, triu)
    return hit


def check_weight_matrix(W: np.ndarray, name: str = "graph") -> np.ndarray:
    """Validate a dense weight matrix: square, symmetric, zero diagonal."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {W.shape}")
    diag = np.diagonal(W)
    # sampled and file-round-tripped matrices are exactly symmetric with an
    # exactly zero diagonal; only fall back to tolerances when they are not
    if np.array_equal(W, W.T) and not diag.any():
        return W
    scale = max(float(np.abs(W).max(initial=0.0)), 1.0)
    if not np.allclose(W, W.T, atol=1e-8 * scale, rtol=0.0):
        raise ValidationError(f"{name} must be symmetric")
    if np.any(np.abs(diag) > 1e-12 * scale):
        raise ValidationError(f"{name} must have a zero diagonal")
    return W


def sample_graph(spec: BlockModelSpec, seed) -> np.ndarray:
    """Draw one symmetric zero-diagonal weight matrix from the model.

    Entry (i, j) with i < j is drawn from the intra law when i and j share a
    block and from the inter law otherwise; the lower triangle mirrors the
    upper. Reproducible for a given (spec, seed).
    """
    rng = np.random.default_rng(seed)
    n = spec.n
    same, triu = partition_masks(spec.membership)
    if spec.intra.kind == "bernoulli" and spec.inter.kind == "bernoulli":
        # one uniform field thresholded against p or q, upper triangle only
        p, q = spec.intra.params[0], spec.inter.params[0]
        U = rng.random((n, n))
        B = np.where(same, U < p, U < q)
        B &= triu
        W = B.astype(np.float64)
    else:
        W = np.zeros((n, n), dtype=np.float64)
        intra_mask = same & triu
        inter_mask = ~same & triu
        W[intra_mask] = spec.intra.sample(rng, int(intra_mask.sum()))
        W[inter_mask] = spec.inter.sample(rng, int(inter_mask.sum()))
    W += W.T
    return W


def block_mean_matrix(spec: BlockModelSpec) -> np.ndarray:
    """The K x K matrix of block-pair means: (b_P - b_Q) I + b_Q 11^T."""
    K = spec.K
    bp, bq = spec.intra.mean, spec.inter.mean
    return (bp - bq) * np.eye(K) + bq * np.ones((K, K))


def expectation_matrix(spec: BlockModelSpec) -> np.ndarray:
    """The expected weight matrix Z B Z^T with its diagonal zeroed."""
    same, _ = partition_masks(spec.membership)
    E = np.where(same, spec.intra.mean, spec.inter.mean)
    np.fill_diagonal(E, 0.0)
    return E


def renyi_half_divergence(p_law: WeightLaw, q_law: WeightLaw) -> float:
    """Order-1/2 Renyi divergence between two bernoulli laws.

    Only the bernoulli/bernoulli closed form is implemented; this is the
    separation measure behind the dense-regime assumption.
    """
    if p_law.kind != "bernoulli" or q_law.kind != "bernoulli":
        raise UnsupportedLawError(
            f"renyi divergence implemented for bernoulli pairs only, "
            f"got {p_law.kind!r}/{q_law.kind!r}"
        )
    p, q = p_law.params[0], q_law.params[0]
    inner = math.sqrt(p * q) + math.sqrt((1.0 - p) * (1.0 - q))
    if inner <= 0.0:
        return math.inf
    return max(-2.0 * math.log(inner), 0.0)


def renyi_region_statistic(spec: BlockModelSpec) -> float:
    """Diagnostic n * I_{1/2} / (K log n); values >> 1 indicate the dense testing regime."""
    i_half = renyi_half_divergence(spec.intra, spec.inter)
    return spec.n * i_half / (spec.K * math.log(spec.n))


def snr(p: float, q: float) -> float:
    """(p - q)^2 / p for an unweighted SBM with 0 < q <= p <= 1 (0 when p = q)."""
    if not 0.0 < q <= p <= 1.0:
        raise DomainError(f"need 0 < q <= p <= 1, got p={p}, q={q}")
    return (p - q) ** 2 / p
