import itertools

import numpy as np
import pytest

from glance.cluster import cluster_features, kmeans
from glance.errors import ValidationError


def brute_force_inertia(x, k):
    """Optimal within-cluster squared distance over every labelling of the points."""
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(x)):
        labels = np.array(labels)
        if len(set(labels.tolist())) != k:
            continue
        total = 0.0
        for c in range(k):
            pts = x[labels == c]
            total += ((pts - pts.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return best


SQUARE = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])


def small_instances():
    rng = np.random.default_rng(2024)
    cases = [(SQUARE, 2)]
    for n in range(3, 9):
        for k in (1, 2, 3):
            if k <= n:
                cases.append((rng.standard_normal((n, 2)) * rng.uniform(0.5, 3), k))
    # clustered points and exact duplicates
    blobs = np.concatenate([rng.normal(c, 0.3, (2, 2)) for c in ((0, 0), (4, 0), (0, 4))])
    cases.append((np.concatenate([blobs, blobs[:2]]), 3))
    cases.append((np.array([[1.0, 1.0]] * 4 + [[2.0, 2.0]] * 2), 3))
    return cases


class TestExamples:
    def test_single_cluster_is_global_mean(self, rng):
        x = rng.standard_normal((9, 3))
        c = kmeans(x, 1, seed=0)
        np.testing.assert_allclose(c.centroids[0], x.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(cluster_features(x, c).values, np.tile(x.mean(axis=0), (9, 1)))

    def test_square(self):
        assert brute_force_inertia(SQUARE, 2) == pytest.approx(1.0)
        c = kmeans(SQUARE, 2, seed=5)
        got = sorted(map(tuple, c.centroids.tolist()))
        assert got == [(0.0, 0.5), (10.0, 0.5)]
        assert c.inertia == pytest.approx(1.0, rel=1e-12)
        rows = cluster_features(SQUARE, c).values
        for i in range(4):
            assert tuple(rows[i]) == ((0.0, 0.5) if SQUARE[i, 0] == 0 else (10.0, 0.5))

    def test_k_equals_n(self, rng):
        x = rng.standard_normal((5, 2))
        c = kmeans(x, 5, seed=1)
        assert c.inertia == 0.0
        np.testing.assert_array_equal(cluster_features(x, c).values, x)

    def test_errors(self, rng):
        x = rng.standard_normal((3, 2))
        with pytest.raises(ValidationError):
            kmeans(x, 4)
        bad = x.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValidationError):
            kmeans(bad, 2)

    def test_determinism(self, rng):
        x = rng.standard_normal((40, 3))
        a, b = kmeans(x, 4, seed=11), kmeans(x, 4, seed=11)
        assert np.array_equal(a.assignment, b.assignment)
        assert np.array_equal(a.centroids, b.centroids)


@pytest.mark.parametrize("case", range(len(small_instances())))
def test_quality_against_brute_force(case):
    x, k = small_instances()[case]
    optimum = brute_force_inertia(x, k)
    for seed in range(20):
        c = kmeans(x, k, seed=seed)
        assert c.inertia <= 1.05 * optimum + 1e-12, (seed, c.inertia, optimum)


@pytest.mark.parametrize("seed", range(15))
def test_lloyd_invariants(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(5, 60)), int(rng.integers(1, 6))
    x = rng.standard_normal((n, 3))
    c = kmeans(x, k, seed=seed, n_init=1)
    trace = np.array(c.inertia_trace)
    assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1.0, trace[:-1]))
    assert set(c.assignment.tolist()) <= set(range(k))
    for j in np.unique(c.assignment):
        np.testing.assert_allclose(c.centroids[j], x[c.assignment == j].mean(axis=0), atol=1e-9)
    d = ((x[:, None, :] - c.centroids[None]) ** 2).sum(axis=2)
    own = d[np.arange(n), c.assignment]
    assert np.all(own <= d.min(axis=1) + 1e-9)
    recomputed = ((x - c.centroids[c.assignment]) ** 2).sum()
    assert c.inertia == pytest.approx(recomputed, rel=1e-6)


def test_empty_cluster_repair_keeps_k():
    # many duplicates: k-means++ must still deliver k non-empty clusters
    x = np.array([[0.0, 0.0]] * 6 + [[1.0, 0.0], [0.0, 1.0]])
    c = kmeans(x, 3, seed=0)
    assert len(set(c.assignment.tolist())) == 3
