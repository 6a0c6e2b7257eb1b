from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measure_bench.measures import MEASURES, all_dissimilarities
from measure_bench.partition import Partition, confusion_matrix, reference_partition
from measure_bench.transforms import (KINDS, TransformError, TransformSpec, affected_counts, apply_transform,
                                      shift_clusters, split_clusters, t_onc)

SIXTH = Fraction(1, 6)


def sizes_of(p):
    return p.sizes().tolist()


def test_effective_proportion():
    assert TransformSpec("knc", 0.5).effective_proportion == 0.25
    assert TransformSpec("ncs", 1.0).effective_proportion == 0.5
    for kind in ("sc", "onc", "oc"):
        assert TransformSpec(kind, 0.3).effective_proportion == pytest.approx(0.3)


@pytest.mark.parametrize("spec", [("xyz", 0.1), ("sc", -0.1), ("sc", 1.2)])
def test_spec_validation(spec):
    with pytest.raises(TransformError):
        TransformSpec(*spec)


@pytest.mark.parametrize("sizes, p, counts", [
    ([24, 24, 24], SIXTH, [4, 4, 4]),
    ([18, 24, 30], SIXTH, [3, 4, 5]),
    ([18, 24, 30], 0.1, [2, 2, 3]),
    ([18, 24, 30], Fraction(1, 12), [1, 2, 3]),
])
def test_affected_counts_examples(sizes, p, counts):
    alloc = affected_counts(sizes, p)
    assert list(alloc.counts) == counts
    assert alloc.total == sum(counts)


@given(st.lists(st.integers(1, 200), min_size=1, max_size=12), st.fractions(0, 1, max_denominator=100))
def test_affected_counts_invariants(sizes, p):
    alloc = affected_counts(sizes, p)
    n = sum(sizes)
    assert alloc.total == sum(alloc.counts) == int(p * n + Fraction(1, 2))
    for c, s in zip(alloc.counts, sizes):
        assert 0 <= c <= s
        assert abs(c - p * s) < 1


@pytest.mark.parametrize("h, kind, q, expected", [
    (0.0, "knc", SIXTH, [22, 22, 22, 2, 2, 2]),
    (0.5, "knc", SIXTH, [17, 22, 27, 1, 2, 3]),
    (0.0, "knc", 1, [12] * 6),
    (0.0, "sc", SIXTH, [20, 20, 20] + [1] * 12),
    (0.5, "sc", SIXTH, [15, 20, 25] + [1] * 12),
    (0.0, "onc", SIXTH, [20, 20, 20, 12]),
    (0.5, "onc", SIXTH, [15, 20, 25, 12]),
    (0.0, "ncs", SIXTH, [24, 24, 24]),
    (0.0, "oc", SIXTH, [20, 20, 20, 3, 3, 3, 3]),
    (0.5, "oc", SIXTH, [15, 20, 25, 3, 3, 3, 2, 1]),
])
def test_transform_examples(h, kind, q, expected):
    out = apply_transform(reference_partition(72, 3, h), TransformSpec(kind, q))
    assert sorted(sizes_of(out)) == sorted(expected)


def test_sc_full_intensity_gives_singletons():
    out = apply_transform(reference_partition(72, 3, 0.5), TransformSpec("sc", 1))
    assert out.k == 72


def test_ncs_moves_circularly():
    ref = reference_partition(72, 3, 0.0)
    out = apply_transform(ref, TransformSpec("ncs", SIXTH))
    cm = confusion_matrix(ref, out).counts
    # two elements of each cluster now sit with the next cluster
    assert sorted(cm.ravel().tolist()) == [0] * 3 + [2] * 3 + [22] * 3


def test_ncs_half_swap_example():
    out = apply_transform(Partition([0, 0, 1, 1], 2), TransformSpec("ncs", 1))
    assert out.labels.tolist() == [0, 1, 1, 0]


@pytest.mark.parametrize("kind", KINDS)
def test_zero_intensity_is_identity(kind):
    ref = reference_partition(540, 4, 0.3)
    out = apply_transform(ref, TransformSpec(kind, 0))
    assert out == ref
    assert out.labels.tolist() == ref.labels.tolist()


def test_onc_full_intensity_refused_by_default():
    ref = reference_partition(72, 3, 0.0)
    with pytest.raises(TransformError):
        t_onc(ref, TransformSpec("onc", 1))
    out = apply_transform(ref, TransformSpec("onc", 1), allow_full_onc=True)
    assert out.k == 1


@pytest.mark.parametrize("kind", ["ncs", "oc"])
def test_single_cluster_rejected(kind):
    with pytest.raises(TransformError, match="k must be ≥ 2"):
        apply_transform(Partition([0, 0, 0], 1), TransformSpec(kind, 0.5))


@st.composite
def grid_points(draw):
    k = draw(st.integers(2, 8))
    n = draw(st.integers(k * (k + 1), 600))
    h = draw(st.integers(0, 9)) / 10
    q = draw(st.integers(0, 10)) / 10
    return reference_partition(n, k, h), q


def _is_refinement(fine, coarse):
    cm = confusion_matrix(fine, coarse).counts
    return bool(((cm > 0).sum(axis=1) == 1).all())


@settings(max_examples=150, deadline=None)
@given(grid_points(), st.sampled_from(KINDS))
def test_element_conservation_and_dense_labels(point, kind):
    ref, q = point
    out = apply_transform(ref, TransformSpec(kind, q), allow_full_onc=True)
    assert out.n == ref.n
    # dense first-appearance numbering
    first = np.unique(out.labels, return_index=True)[1]
    assert np.all(np.diff(first) > 0)


@settings(max_examples=150, deadline=None)
@given(grid_points(), st.sampled_from(["knc", "sc"]))
def test_refinement(point, kind):
    ref, q = point
    assert _is_refinement(apply_transform(ref, TransformSpec(kind, q)), ref)


@settings(max_examples=150, deadline=None)
@given(grid_points())
def test_k_count_contracts(point):
    ref, q = point
    alloc = affected_counts(ref.sizes(), Fraction(q).limit_denominator(10))
    remainders_nonempty = all(c < s for c, s in zip(alloc.counts, ref.sizes()))
    assert apply_transform(ref, TransformSpec("ncs", q)).k == ref.k
    if alloc.total and remainders_nonempty:
        assert apply_transform(ref, TransformSpec("onc", q)).k == ref.k + 1
        assert apply_transform(ref, TransformSpec("sc", q)).k == ref.k + alloc.total


@settings(max_examples=150, deadline=None)
@given(grid_points())
def test_orthogonality(point):
    ref, q = point
    out = apply_transform(ref, TransformSpec("oc", q))
    alloc = affected_counts(ref.sizes(), Fraction(q).limit_denominator(10))
    starts = np.concatenate(([0], np.cumsum(ref.sizes())[:-1]))
    kept = {int(out.labels[s]) for s, c, size in zip(starts, alloc.counts, ref.sizes()) if c < size}
    new = [c for c in range(out.k) if c not in kept]
    cm = confusion_matrix(ref, out).counts
    assert cm[:, new].max(initial=0) <= 1
    assert len(new) == max(alloc.counts)


@pytest.mark.parametrize("move", [split_clusters, shift_clusters])
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 3)])
@pytest.mark.parametrize("k", [2, 3, 4])
def test_mirroring(move, p, k):
    ref = reference_partition(12 * k, k, 0.0)
    low, high = move(ref, p), move(ref, 1 - p)
    assert sorted(sizes_of(low)) == sorted(sizes_of(high))
    a, b = all_dissimilarities(ref, low), all_dissimilarities(ref, high)
    for m in MEASURES:
        assert a[m].dissimilarity == pytest.approx(b[m].dissimilarity, abs=1e-12)


@pytest.mark.parametrize("move", [split_clusters, shift_clusters])
@pytest.mark.parametrize("p", [Fraction(1, 4), Fraction(1, 3)])
def test_mirrored_contingency_tables_match(move, p):
    ref = reference_partition(36, 3, 0.0)
    a = confusion_matrix(ref, move(ref, p)).counts
    b = confusion_matrix(ref, move(ref, 1 - p)).counts
    assert sorted(a.ravel().tolist()) == sorted(b.ravel().tolist())


@pytest.mark.parametrize("kind", KINDS)
def test_determinism(kind):
    ref = reference_partition(4320, 6, 0.4)
    a = apply_transform(ref, TransformSpec(kind, 0.7))
    b = apply_transform(ref, TransformSpec(kind, 0.7))
    assert a.labels.tobytes() == b.labels.tobytes()
