"""Quantile, NMS, and DBSCAN against independent oracles."""

import numpy as np

from gecm.pointops import dbscan, greedy_nms, nms_by_score, quantile

from oracles import dbscan_reference, nms_reference, quantile_sorted


def test_quantile_matches_sort_oracle_all_sizes():
    rng = np.random.default_rng(42)
    for n in range(1, 1001):
        xs = rng.standard_normal(n)
        q = rng.uniform(0, 1)
        assert quantile(xs, q) == quantile_sorted(xs, q), f"n={n} q={q}"


def test_quantile_known_values():
    xs = np.array([1.0, 2.0, 3.0, 4.0])
    assert quantile(xs, 0.0) == 1.0
    assert quantile(xs, 1.0) == 4.0
    assert quantile(xs, 0.5) == 2.5


def test_dbscan_matches_bruteforce_reference():
    rng = np.random.default_rng(0)
    for trial in range(100):
        n = int(rng.integers(0, 51))
        pts = rng.uniform(0, 20, size=(n, 2))
        eps = float(rng.uniform(0.5, 4.0))
        m = int(rng.integers(1, 6))
        got = dbscan(pts, eps, m)
        want = dbscan_reference(pts, eps, m)
        assert np.array_equal(got, want), f"trial={trial}"


def test_dbscan_label_permutation_equivalence():
    # Same clusters under any relabeling: compare partition structure too.
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 10, size=(40, 2))
    got = dbscan(pts, 1.5, 2)
    want = dbscan_reference(pts, 1.5, 2)
    def partition(labels):
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, set()).add(i)
        noise = groups.pop(-1, set())
        return set(map(frozenset, groups.values())), noise
    assert partition(got) == partition(want)


def test_dbscan_two_clusters_far_apart():
    pts = np.array([[0, 0], [1, 0], [2, 0], [50, 0], [51, 0], [52, 0]], dtype=float)
    labels = dbscan(pts, eps=3.0, min_samples=2)
    assert set(labels) == {0, 1}
    assert list(labels[:3]) == [0, 0, 0]
    assert list(labels[3:]) == [1, 1, 1]


def test_nms_matches_exhaustive_oracle():
    rng = np.random.default_rng(11)
    for trial in range(50):
        n = int(rng.integers(1, 120))
        pts = rng.uniform(0, 50, size=(n, 2))
        scores = rng.uniform(0, 1, size=n)
        radius = float(rng.uniform(1.0, 8.0))
        got = nms_by_score(pts, scores, radius)
        want = nms_reference(pts, scores, radius)
        assert np.array_equal(got, want), f"trial={trial}"


def test_nms_postconditions():
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 30, size=(80, 2))
    scores = rng.uniform(0, 1, size=80)
    radius = 4.0
    kept = nms_by_score(pts, scores, radius)
    assert set(kept) <= set(range(80))
    assert int(np.argmax(scores)) in kept  # top-scored input always survives
    out = pts[kept]
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            assert np.hypot(*(out[i] - out[j])) >= radius


def test_greedy_nms_respects_visit_order():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    kept = greedy_nms(pts, radius=2.0, order=np.array([1, 0, 2]))
    assert list(kept) == [1, 2]
