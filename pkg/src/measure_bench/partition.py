"""Partitions, confusion matrices, pair counts and reference partition generation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def as_fraction(x) -> Fraction:
    """Exact rational for a grid value such as 0.1 or 1/6 given as a float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x).limit_denominator(10**6)


@dataclass(frozen=True, eq=False)
class Partition:
    """Label assignment of ``n`` elements to ``k`` non-empty clusters."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("a partition needs at least one element")
        if not 1 <= self.k <= labels.size:
            raise ValueError(f"k={self.k} outside [1, n={labels.size}]")
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValueError(f"labels must lie in [0, {self.k - 1}]")
        if np.bincount(labels, minlength=self.k).min() == 0:
            raise ValueError("every cluster must be non-empty")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Build from arbitrary hashable labels, renumbered densely by first appearance."""
        dense = dense_relabel(labels)
        return cls(dense, int(dense.max()) + 1 if dense.size else 0)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.k, self.labels.tobytes()))

    def __repr__(self):
        return f"Partition(n={self.n}, k={self.k}, sizes={self.sizes().tolist()})"


def dense_relabel(labels) -> np.ndarray:
    """Renumber labels 0, 1, ... in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse.ravel()]


@dataclass(frozen=True)
class ClusterSizeSpec:
    n: int
    k: int
    h: float
    beta_max: float
    increment: int
    alpha: int
    sizes: tuple[int, ...]


def cluster_sizes(n: int, k: int, h: float) -> ClusterSizeSpec:
    """Arithmetic-progression cluster sizes for ``n`` elements, ``k`` clusters and
    heterogeneity ``h``.

    The largest admissible increment makes the first size equal to the increment
    itself, which gives ``beta_max = 2n / (k(k+1))``. The increment used is
    ``floor(h * beta_max)``, the first size is floored, and whatever is left over
    goes to the last (largest) cluster.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    hf = as_fraction(h)
    if not 0 <= hf <= 1:
        raise ValueError(f"h must lie in [0, 1], got {h}")
    beta_max = Fraction(2 * n, k * (k + 1))
    increment = math.floor(hf * beta_max)
    alpha = (n - increment * k * (k - 1) // 2) // k
    if alpha < 1:
        raise ValueError(f"infeasible sizes for n={n}, k={k}, h={h}: smallest cluster would be {alpha}")
    sizes = [alpha + i * increment for i in range(k)]
    sizes[-1] += n - sum(sizes)
    return ClusterSizeSpec(n, k, float(h), float(beta_max), increment, alpha, tuple(sizes))


def build_reference_partition(spec: ClusterSizeSpec) -> Partition:
    """Contiguous layout: cluster 0 takes the first ``sizes[0]`` indices, and so on."""
    labels = np.repeat(np.arange(spec.k, dtype=np.int64), spec.sizes)
    return Partition(labels, spec.k)


def reference_partition(n: int, k: int, h: float) -> Partition:
    return build_reference_partition(cluster_sizes(n, k, h))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray
    row_marginals: np.ndarray
    col_marginals: np.ndarray
    total: int

    @classmethod
    def from_counts(cls, counts) -> "ConfusionMatrix":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2 or (counts < 0).any():
            raise ValueError("counts must be a 2-D nonnegative integer matrix")
        return cls(counts, counts.sum(axis=1), counts.sum(axis=0), int(counts.sum()))

    def transpose(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts.T, self.col_marginals, self.row_marginals, self.total)


def confusion_matrix(p: Partition, p_prime: Partition) -> ConfusionMatrix:
    if p.n != p_prime.n:
        raise ValueError(f"partitions cover different element counts ({p.n} vs {p_prime.n})")
    flat = p.labels * p_prime.k + p_prime.labels
    counts = np.bincount(flat, minlength=p.k * p_prime.k).reshape(p.k, p_prime.k)
    return ConfusionMatrix.from_counts(counts)


@dataclass(frozen=True)
class PairCounts:
    n11: int
    n00: int
    n10: int
    n01: int
    total: int


def pair_counts(cm: ConfusionMatrix) -> PairCounts:
    c = cm.counts
    sum_sq = int((c * c).sum())
    n11 = int((c * (c - 1)).sum()) // 2
    n10 = (int((cm.row_marginals**2).sum()) - sum_sq) // 2
    n01 = (int((cm.col_marginals**2).sum()) - sum_sq) // 2
    # n00 from its own closed form, so the four counts can be checked against the pair total
    n00 = (cm.total**2 - int((cm.row_marginals**2).sum()) - int((cm.col_marginals**2).sum()) + sum_sq) // 2
    total = cm.total * (cm.total - 1) // 2
    return PairCounts(n11=n11, n00=n00, n10=n10, n01=n01, total=total)
