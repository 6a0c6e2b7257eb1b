"""The five deterministic parametric transformations of a reference partition.

Every transformation touches, in each cluster, a number of elements proportional
to the cluster size. The touched elements are the highest element indices of
the cluster, so the result depends only on the partition and the intensity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .partition import Partition, as_fraction, dense_relabel

KINDS = ("knc", "sc", "onc", "ncs", "oc")
# transformations whose effect is mirrored at proportion 0.5; q is twice the proportion
MIRRORED = frozenset({"knc", "ncs"})

KIND_NAMES = {
    "knc": "k New Clusters",
    "sc": "Singleton Clusters",
    "onc": "1 New Cluster",
    "ncs": "Neighbor Cluster Swaps",
    "oc": "Orthogonal Clusters",
}


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class TransformSpec:
    kind: str
    q: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TransformError(f"unknown transformation {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not 0 <= as_fraction(self.q) <= 1:
            raise TransformError(f"q must lie in [0, 1], got {self.q}")

    @property
    def proportion(self) -> Fraction:
        q = as_fraction(self.q)
        return q / 2 if self.kind in MIRRORED else q

    @property
    def effective_proportion(self) -> float:
        return float(self.proportion)


@dataclass(frozen=True)
class AffectedAllocation:
    counts: tuple[int, ...]
    total: int


def affected_counts(sizes, p) -> AffectedAllocation:
    """Per-cluster counts ``c_i`` proportional to ``sizes`` with ``sum(c) = round(p * n)``.

    Floors of ``p * s_i`` are topped up by largest remainder. Equal remainders
    go to the larger cluster first, then to the higher index.
    """
    p = as_fraction(p)
    if not 0 <= p <= 1:
        raise TransformError(f"proportion must lie in [0, 1], got {p}")
    sizes = [int(s) for s in sizes]
    exact = [p * s for s in sizes]
    counts = [math.floor(e) for e in exact]
    target = math.floor(p * sum(sizes) + Fraction(1, 2))
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - counts[i]), -sizes[i], -i))
    for i in order[: target - sum(counts)]:
        counts[i] += 1
    return AffectedAllocation(tuple(counts), target)


def _affected_members(p: Partition, proportion) -> list[np.ndarray]:
    """For each cluster, its affected element indices in ascending order."""
    sizes = p.sizes()
    alloc = affected_counts(sizes, proportion)
    order = np.argsort(p.labels, kind="stable")
    bounds = np.concatenate(([0], np.cumsum(sizes)))
    return [order[bounds[i + 1] - c : bounds[i + 1]] for i, c in enumerate(alloc.counts)]


def _finish(labels: np.ndarray) -> Partition:
    return Partition.from_labels(labels)


def split_clusters(p: Partition, proportion) -> Partition:
    """Move the affected part of each cluster, at ``proportion``, into a new cluster."""
    labels = p.labels.copy()
    for i, members in enumerate(_affected_members(p, proportion)):
        labels[members] = p.k + i
    return _finish(labels)


def t_knc(p: Partition, spec: TransformSpec) -> Partition:
    """k New Clusters: the affected part of each cluster becomes a new cluster."""
    return split_clusters(p, spec.proportion)


def t_sc(p: Partition, spec: TransformSpec) -> Partition:
    """Singleton Clusters: every affected element becomes its own cluster."""
    labels = p.labels.copy()
    affected = np.sort(np.concatenate(_affected_members(p, spec.proportion)))
    labels[affected] = p.k + np.arange(affected.size)
    return _finish(labels)


def t_onc(p: Partition, spec: TransformSpec, allow_full: bool = False) -> Partition:
    """1 New Cluster: all affected elements are gathered into one cluster.

    ``q = 1`` collapses everything into a single cluster and is refused unless
    ``allow_full`` is set.
    """
    if as_fraction(spec.q) == 1 and not allow_full:
        raise TransformError("onc with q = 1 merges every element into one cluster; pass allow_full to accept it")
    labels = p.labels.copy()
    labels[np.concatenate(_affected_members(p, spec.proportion))] = p.k
    return _finish(labels)


def shift_clusters(p: Partition, proportion) -> Partition:
    """Move the affected part of cluster i, at ``proportion``, to cluster (i+1) mod k."""
    if p.k < 2:
        raise TransformError("k must be ≥ 2 for ncs")
    labels = p.labels.copy()
    for i, members in enumerate(_affected_members(p, proportion)):
        labels[members] = (i + 1) % p.k
    return _finish(labels)


def t_ncs(p: Partition, spec: TransformSpec) -> Partition:
    """Neighbor Cluster Swaps: the affected part of cluster i moves to cluster (i+1) mod k."""
    return shift_clusters(p, spec.proportion)


def t_oc(p: Partition, spec: TransformSpec) -> Partition:
    """Orthogonal Clusters: the j-th affected element of every cluster joins new cluster j."""
    if p.k < 2:
        raise TransformError("k must be ≥ 2 for oc")
    labels = p.labels.copy()
    for members in _affected_members(p, spec.proportion):
        labels[members] = p.k + np.arange(members.size)
    return _finish(labels)


_DISPATCH = {"knc": t_knc, "sc": t_sc, "onc": t_onc, "ncs": t_ncs, "oc": t_oc}


def apply_transform(p: Partition, spec: TransformSpec, allow_full_onc: bool = False) -> Partition:
    if spec.kind == "onc":
        return t_onc(p, spec, allow_full=allow_full_onc)
    return _DISPATCH[spec.kind](p, spec)
