"""The six external measures, computed from a confusion matrix, and their
conversion to dissimilarities."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .partition import ConfusionMatrix, PairCounts, Partition, confusion_matrix, pair_counts

MEASURES = ("RI", "ARI", "JI", "FMI", "F", "NMI")


class MeasureError(ValueError):
    pass


def _require_pairs(pc: PairCounts):
    if pc.total < 1:
        raise MeasureError("at least two elements are needed to count pairs")


def _identical_structure(pc: PairCounts) -> bool:
    return pc.n10 == 0 and pc.n01 == 0


def rand_index(pc: PairCounts) -> float:
    _require_pairs(pc)
    return (pc.n11 + pc.n00) / pc.total


def adjusted_rand(cm: ConfusionMatrix) -> float:
    """Hubert-Arabie adjusted Rand index under the permutation model."""
    n = cm.total
    if n < 2:
        raise MeasureError("at least two elements are needed to count pairs")
    c = cm.counts
    index = int((c * (c - 1)).sum()) // 2
    a = int((cm.row_marginals * (cm.row_marginals - 1)).sum()) // 2
    b = int((cm.col_marginals * (cm.col_marginals - 1)).sum()) // 2
    pairs = n * (n - 1) // 2
    # scale by the pair count so the ratio stays in exact integers until the end
    numerator = index * pairs - a * b
    denominator = (a + b) * pairs - 2 * a * b
    if denominator == 0:
        if a == b == index:
            return 1.0
        raise MeasureError("adjusted Rand index undefined: zero denominator for non-identical partitions")
    return 2 * numerator / denominator


def jaccard(pc: PairCounts) -> float:
    _require_pairs(pc)
    denominator = pc.n11 + pc.n01 + pc.n10
    if denominator == 0:
        return 1.0
    return pc.n11 / denominator


def fowlkes_mallows(pc: PairCounts) -> float:
    _require_pairs(pc)
    if pc.n11 == 0:
        return 1.0 if _identical_structure(pc) else 0.0
    return pc.n11 / math.sqrt((pc.n11 + pc.n10) * (pc.n11 + pc.n01))


def purity(cm: ConfusionMatrix) -> float:
    return int(cm.counts.max(axis=1).sum()) / cm.total


def f_measure(cm: ConfusionMatrix) -> float:
    """Harmonic mean of purity and inverse purity."""
    pu = purity(cm)
    inv = purity(cm.transpose())
    return 2 * pu * inv / (pu + inv)


def entropy(sizes) -> float:
    sizes = np.asarray(sizes, dtype=np.float64)
    prob = sizes[sizes > 0] / sizes.sum()
    return float(-(prob * np.log(prob)).sum())


def mutual_information(cm: ConfusionMatrix) -> float:
    n = cm.total
    rows, cols = np.nonzero(cm.counts)
    nij = cm.counts[rows, cols].astype(np.float64)
    ratio = nij * n / (cm.row_marginals[rows].astype(np.float64) * cm.col_marginals[cols])
    return float((nij / n * np.log(ratio)).sum())


def nmi(cm: ConfusionMatrix) -> float:
    """Mutual information normalized by the mean of the two entropies (natural log)."""
    k, k_prime = cm.counts.shape
    if k == k_prime == np.count_nonzero(cm.counts):
        # same partition up to relabeling, including the 0/0 single-cluster case
        return 1.0
    h_sum = entropy(cm.row_marginals) + entropy(cm.col_marginals)
    value = 2 * mutual_information(cm) / h_sum
    return min(max(value, 0.0), 1.0)


def similarity_from_cm(kind: str, cm: ConfusionMatrix, pc: PairCounts | None = None) -> float:
    if kind in ("RI", "JI", "FMI") and pc is None:
        pc = pair_counts(cm)
    if kind == "RI":
        return rand_index(pc)
    if kind == "ARI":
        return adjusted_rand(cm)
    if kind == "JI":
        return jaccard(pc)
    if kind == "FMI":
        return fowlkes_mallows(pc)
    if kind == "F":
        return f_measure(cm)
    if kind == "NMI":
        return nmi(cm)
    raise MeasureError(f"unknown measure {kind!r}; expected one of {', '.join(MEASURES)}")


@dataclass(frozen=True)
class MeasureScore:
    kind: str
    similarity: float
    dissimilarity: float
    out_of_range: bool


def score_from_cm(kind: str, cm: ConfusionMatrix, pc: PairCounts | None = None) -> MeasureScore:
    s = similarity_from_cm(kind, cm, pc)
    # negative ARI is kept unclamped and flagged
    return MeasureScore(kind, s, 1.0 - s, not 0.0 <= s <= 1.0)


def dissimilarity(kind: str, p: Partition, p_prime: Partition) -> MeasureScore:
    return score_from_cm(kind, confusion_matrix(p, p_prime))


def all_dissimilarities(p: Partition, p_prime: Partition, kinds=MEASURES) -> dict[str, MeasureScore]:
    cm = confusion_matrix(p, p_prime)
    pc = pair_counts(cm)
    return {kind: score_from_cm(kind, cm, pc) for kind in kinds}
