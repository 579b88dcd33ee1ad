"""K-means clustering and nearest-center assignment."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itemhev.clustering import (
    ClusterModel,
    assign,
    assign_normalized,
    fit_features,
    kmeans_fit,
    load_model,
    normalize,
    save_model,
)
from itemhev.cycles import TRAINING_CYCLES, TripFeatures, bundled_cycle, extract_features, segment
from itemhev.errors import FormatError, ValidationError

SIX = np.array([(0, 0), (0.1, 0), (5, 5), (5.1, 5), (10, 0), (10, 0.1)], dtype=float)


def partition_inertia(points, labels):
    total = 0.0
    for j in set(labels):
        m = points[np.asarray(labels) == j]
        total += ((m - m.mean(axis=0)) ** 2).sum()
    return total


def brute_force_optimum(points, k):
    """Minimal inertia over every assignment of points to at most k clusters."""
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(points)):
        if labels[0] != 0:
            continue  # symmetry
        best = min(best, partition_inertia(points, labels))
    return best


def canonical(labels):
    seen = {}
    return tuple(seen.setdefault(l, len(seen)) for l in labels)


def labels_of(model, points):
    return [assign_normalized(model, p) for p in points]


class TestNormalize:
    def test_hand_values(self):
        pts, mean, scale = normalize(np.array([(0.0, 0.0), (2.0, 2.0)]))
        np.testing.assert_array_equal(pts, [(-1, -1), (1, 1)])
        np.testing.assert_array_equal(mean, [1, 1])
        np.testing.assert_array_equal(scale, [1, 1])

    def test_zero_variance(self):
        with pytest.raises(ValidationError):
            normalize(np.array([(1.0, 0.0), (1.0, 2.0), (1.0, 3.0)]))

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        pts, _, _ = normalize(rng.normal(size=(50, 2)) * 7 + 3)
        again, mean, scale = normalize(pts)
        np.testing.assert_allclose(again, pts, atol=1e-12)
        np.testing.assert_allclose(mean, 0, atol=1e-12)
        np.testing.assert_allclose(scale, 1, atol=1e-12)

    def test_accepts_trip_features(self):
        pts, _, _ = normalize([TripFeatures(0.0, 0.0), TripFeatures(2.0, 2.0)])
        assert pts.shape == (2, 2)


class TestKmeansFit:
    def test_k_equals_n(self):
        pts = np.array([(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)])
        m = kmeans_fit(pts, k=3, seed=0)
        assert m.inertia == 0.0
        assert sorted(map(tuple, m.centers)) == sorted(map(tuple, pts))

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((2, 2)), k=3)

    def test_six_point_instance_matches_brute_force(self):
        best = brute_force_optimum(SIX, 3)
        m = kmeans_fit(SIX, k=3, seed=0)
        assert m.inertia == pytest.approx(best, abs=1e-12)
        assert canonical(labels_of(m, SIX)) == (0, 0, 1, 1, 2, 2)

    def test_random_six_point_instances(self):
        hits = 0
        for s in range(100):
            pts = np.random.default_rng(s).normal(size=(6, 2))
            hits += kmeans_fit(pts, 3, seed=s).inertia <= brute_force_optimum(pts, 3) + 1e-12
        assert hits >= 95

    def test_restarts_never_worse(self):
        pts = np.random.default_rng(5).normal(size=(30, 2))
        assert kmeans_fit(pts, 4, seed=1, n_init=20).inertia <= kmeans_fit(pts, 4, seed=1, n_init=1).inertia
        with pytest.raises(ValueError):
            kmeans_fit(pts, 3, n_init=0)

    def test_deterministic(self):
        a = kmeans_fit(SIX, 3, seed=7)
        b = kmeans_fit(SIX, 3, seed=7)
        np.testing.assert_array_equal(a.centers, b.centers)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_inertia_monotone(self, seed, k):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(40, 2))
        h = kmeans_fit(pts, k=k, seed=seed, n_init=1).inertia_history
        assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_permutation_keeps_partition(self, seed):
        # well separated blobs have a unique optimum
        rng = np.random.default_rng(seed)
        pts = np.concatenate([rng.normal(c, 0.1, size=(8, 2)) for c in ((0, 0), (5, 0), (0, 5))])
        perm = rng.permutation(len(pts))
        a = labels_of(kmeans_fit(pts, 3, seed=0), pts)
        mp = kmeans_fit(pts[perm], 3, seed=0)
        b = np.empty(len(pts), dtype=int)
        b[perm] = labels_of(mp, pts[perm])
        assert canonical(a) == canonical(b.tolist())

    def test_empty_cluster_repair_keeps_k_clusters(self):
        # duplicates force coincident seeds for some streams
        pts = np.array([(0.0, 0.0)] * 5 + [(1.0, 1.0), (2.0, 2.0)])
        for seed in range(20):
            m = kmeans_fit(pts, 3, seed=seed)
            assert len(set(labels_of(m, pts))) == 3

    def test_bundled_roster_three_nonempty_clusters(self):
        feats = [extract_features(t, c.dt) for n in TRAINING_CYCLES for c in [bundled_cycle(n)] for t in segment(c)]
        model, labels = fit_features(feats, k=3, seed=0)
        assert np.bincount(labels, minlength=3).min() > 0
        # sorted by average speed
        assert np.all(np.diff(model.centers_raw()[:, 0]) > 0)


class TestAssign:
    def model(self):
        return ClusterModel(np.array([(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]), np.zeros(2), np.ones(2))

    def test_at_center(self):
        assert assign(self.model(), np.array([2.0, 0.0])) == 1

    def test_tie_lowest_index(self):
        m = ClusterModel(np.array([(0.0, 0.0), (5.0, 5.0), (2.0, 0.0)]), np.zeros(2), np.ones(2))
        assert assign(m, np.array([1.0, 0.0])) == 0

    def test_raw_features_are_normalized(self):
        m = ClusterModel(np.array([(0.0, 0.0), (1.0, 0.0)]), np.array([10.0, 1.0]), np.array([5.0, 1.0]))
        assert assign(m, TripFeatures(15.0, 1.0)) == 1
        assert assign(m, TripFeatures(10.0, 1.0)) == 0

    def test_linear_scan_oracle(self):
        rng = np.random.default_rng(0)
        m = ClusterModel(rng.normal(size=(3, 2)), rng.normal(size=2), rng.uniform(0.5, 2, size=2))
        for q in rng.normal(size=(1000, 2)) * 3:
            z = (q - m.feat_mean) / m.feat_scale
            best, best_d = 0, np.inf
            for j, c in enumerate(m.centers):
                d = float(((z - c) ** 2).sum())
                if d < best_d:
                    best, best_d = j, d
            assert assign(m, q) == best


class TestPersistence:
    def test_round_trip(self, tmp_path):
        pts, mean, scale = normalize(np.random.default_rng(2).normal(size=(30, 2)))
        m = kmeans_fit(pts, 3, seed=1, feat_mean=mean, feat_scale=scale)
        save_model(m, tmp_path / "m.txt")
        r = load_model(tmp_path / "m.txt")
        np.testing.assert_array_equal(r.centers, m.centers)
        np.testing.assert_array_equal(r.feat_mean, m.feat_mean)
        np.testing.assert_array_equal(r.feat_scale, m.feat_scale)
        assert r.inertia == m.inertia

    def test_bad_version(self, tmp_path):
        m = ClusterModel(np.zeros((1, 2)), np.zeros(2), np.ones(2))
        save_model(m, tmp_path / "m.txt")
        p = tmp_path / "m.txt"
        p.write_text(p.read_text().replace("itemhev-cluster-model 1", "itemhev-cluster-model 9"))
        with pytest.raises(FormatError):
            load_model(p)

    def test_shape_corruption(self, tmp_path):
        m = ClusterModel(np.zeros((2, 2)), np.zeros(2), np.ones(2))
        p = tmp_path / "m.txt"
        save_model(m, p)
        p.write_text("\n".join(p.read_text().splitlines()[:-1]) + "\n")
        with pytest.raises(FormatError):
            load_model(p)
