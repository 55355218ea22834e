import math

import numpy as np
import pytest

from libags.data import FeatureMatrix
from libags.errors import ValidationError
from libags.geometry import (
    KernelSpec,
    NeighborIndex,
    knn_density,
    knn_distances,
    median_knn_distance,
    median_pairwise_distance,
    similarity,
    similarity_matrix,
    support_validity,
    unit_ball_volume,
)


def brute_force_knn(reference, query, k, exclude_self=False):
    """Independent O(n^2) oracle: per-pair distances, sort by (distance, index)."""
    out = np.empty((len(query), k))
    for i, q in enumerate(query):
        dists = []
        for j, ref in enumerate(reference):
            if exclude_self and i == j:
                continue
            dists.append((np.sqrt(((ref - q) ** 2).sum()), j))
        dists.sort()
        out[i] = [d for d, _ in dists[:k]]
    return out


class TestKnnDistances:
    def test_self_query_distance_zero(self):
        pts = FeatureMatrix(np.array([[0.0, 0.0], [3.0, 4.0]]))
        index = NeighborIndex(pts)
        dists = knn_distances(index, pts, 1)
        np.testing.assert_allclose(dists[:, 0], 0.0, atol=0)

    def test_collinear_self_excluded(self):
        pts = FeatureMatrix(np.array([[0.0], [1.0], [3.0]]))
        index = NeighborIndex(pts)
        dists = knn_distances(index, pts, 2, exclude_self=True)
        np.testing.assert_allclose(dists[0], [1.0, 3.0], atol=0)

    def test_matches_brute_force_exactly(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            n = int(rng.integers(10, 60))
            d = int(rng.integers(1, 5))
            ref = rng.normal(size=(n, d))
            query = rng.normal(size=(15, d))
            k = int(rng.integers(1, n))
            ours = knn_distances(NeighborIndex(FeatureMatrix(ref)), FeatureMatrix(query), k)
            oracle = brute_force_knn(ref, query, k)
            assert np.array_equal(ours, oracle)

    def test_tie_break_by_lower_index(self):
        # two references at identical distance from the query
        ref = FeatureMatrix(np.array([[1.0, 0.0], [-1.0, 0.0], [5.0, 0.0]]))
        query = FeatureMatrix(np.array([[0.0, 0.0]]))
        dists = knn_distances(NeighborIndex(ref), query, 2)
        np.testing.assert_allclose(dists[0], [1.0, 1.0], atol=0)

    def test_k_too_large(self):
        pts = FeatureMatrix(np.ones((3, 2)))
        with pytest.raises(ValidationError):
            knn_distances(NeighborIndex(pts), pts, 4)


class TestKnnDensity:
    def test_two_point_closed_form(self):
        # n=2 points 2 apart in 1-D, query at one of them, self excluded:
        # density = 1 / (2 * V_1 * R) = 1 / (2 * 2 * 2)
        pts = FeatureMatrix(np.array([[0.0], [2.0]]))
        index = NeighborIndex(pts)
        density = knn_density(index, pts, 1, 1, exclude_self=True)
        np.testing.assert_allclose(density, 0.125, atol=1e-12)

    def test_scaling_law(self):
        rng = np.random.default_rng(1)
        for d in (1, 2, 3):
            ref = rng.normal(size=(40, d))
            query = rng.normal(size=(10, d))
            base = knn_density(NeighborIndex(FeatureMatrix(ref)), FeatureMatrix(query), 5, d)
            scaled = knn_density(NeighborIndex(FeatureMatrix(2.0 * ref)), FeatureMatrix(2.0 * query), 5, d)
            np.testing.assert_allclose(scaled, base * 2.0**-d, rtol=1e-9)

    def test_duplicate_cloud_stays_finite(self):
        pts = FeatureMatrix(np.zeros((5, 2)))
        index = NeighborIndex(pts)
        density = knn_density(index, pts, 1, 2, exclude_self=True)
        assert np.all(np.isfinite(density))
        assert np.all(density > 0)

    def test_monte_carlo_standard_gaussian(self):
        rng = np.random.default_rng(42)
        samples = rng.normal(size=(5000, 2))
        index = NeighborIndex(FeatureMatrix(samples))
        probes = np.array([[r * math.cos(t), r * math.sin(t)] for r in (0.0, 0.5, 1.0, 1.5, 2.0) for t in (0.0, 1.6, 3.1, 4.7)])
        estimate = knn_density(index, FeatureMatrix(probes), 50, 2)
        truth = np.exp(-(probes**2).sum(axis=1) / 2.0) / (2.0 * math.pi)
        assert np.abs(estimate - truth).mean() < 0.05

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


class TestSupportValidity:
    def _calibration(self, index, pts, k):
        return knn_distances(index, pts, k, exclude_self=True)[:, k - 1]

    def test_coincident_candidate_full_support(self):
        rng = np.random.default_rng(2)
        pts = FeatureMatrix(rng.normal(size=(60, 2)))
        index = NeighborIndex(pts)
        calib = self._calibration(index, pts, 5)
        # candidate sits exactly on the most tightly packed real point, so
        # its k-th real-neighbor distance is below the calibration median
        center = pts.values[int(np.argmin(calib))]
        b = support_validity(index, FeatureMatrix(center[None, :]), 5, calib)
        assert b[0] == 1.0

    def test_far_candidate_goes_to_zero(self):
        rng = np.random.default_rng(3)
        pts = FeatureMatrix(rng.normal(size=(50, 2)))
        index = NeighborIndex(pts)
        calib = self._calibration(index, pts, 5)
        b = support_validity(index, FeatureMatrix(np.array([[1e6, 1e6]])), 5, calib)
        assert b[0] == 0.0

    def test_identical_reals_floor_gives_zero_not_nan(self):
        pts = FeatureMatrix(np.zeros((6, 2)))
        index = NeighborIndex(pts)
        calib = self._calibration(index, pts, 2)
        b = support_validity(index, FeatureMatrix(np.array([[1.0, 0.0]])), 2, calib)
        assert np.isfinite(b[0]) and b[0] == 0.0

    def test_monotone_in_distance(self):
        rng = np.random.default_rng(4)
        pts = FeatureMatrix(rng.normal(size=(80, 2)))
        index = NeighborIndex(pts)
        calib = self._calibration(index, pts, 5)
        line = FeatureMatrix(np.column_stack([np.linspace(0, 20, 30), np.zeros(30)]))
        b = support_validity(index, line, 5, calib)
        d_k = knn_distances(index, line, 5)[:, 4]
        order = np.argsort(d_k)
        assert np.all(np.diff(b[order]) <= 1e-15)
        assert np.all((b >= 0) & (b <= 1))

    def test_empty_calibration_rejected(self):
        pts = FeatureMatrix(np.ones((3, 2)))
        with pytest.raises(ValidationError):
            support_validity(NeighborIndex(pts), pts, 1, [])


class TestSimilarity:
    def test_identical_rows(self):
        assert similarity(KernelSpec(0.5), [1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_known_value(self):
        sigma = 0.7
        u = np.zeros(3)
        j = np.array([sigma * math.sqrt(2.0), 0.0, 0.0])
        assert similarity(KernelSpec(sigma), u, j) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        kern = KernelSpec(1.3)
        for _ in range(50):
            u, j = rng.normal(size=(2, 4))
            assert similarity(kern, u, j) == similarity(kern, j, u)

    def test_matrix_diagonal_and_range(self):
        rng = np.random.default_rng(6)
        feats = FeatureMatrix(rng.normal(size=(30, 3)))
        S = similarity_matrix(KernelSpec(0.8), feats)
        assert np.array_equal(np.diag(S), np.ones(30))
        assert np.array_equal(S, S.T)
        assert np.all((S >= 0) & (S <= 1))

    def test_bandwidth_must_be_positive(self):
        with pytest.raises(ValidationError):
            KernelSpec(0.0)


class TestBandwidthHeuristics:
    def test_median_pairwise_on_known_points(self):
        feats = FeatureMatrix(np.array([[0.0], [1.0], [3.0]]))
        # pairwise distances {1, 2, 3}, median 2
        assert median_pairwise_distance(feats) == pytest.approx(2.0)

    def test_median_knn_smaller_than_pairwise_on_clustered_data(self):
        rng = np.random.default_rng(7)
        blobs = np.vstack([rng.normal(0, 0.05, size=(50, 2)), rng.normal(10, 0.05, size=(50, 2))])
        feats = FeatureMatrix(blobs)
        assert median_knn_distance(feats, 5) < 0.1 * median_pairwise_distance(feats)
