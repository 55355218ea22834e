"""Neighborhood machinery: kNN queries, kNN density, support validity, kernels.

Neighbor search is brute force over a Euclidean reference set, which is
the right trade at the few-thousand-candidate scale this package targets
(the full candidate-candidate similarity matrix is quadratic anyway).
Distances for each query row are computed with the direct differences
formula so results are reproducible bit for bit against a pairwise oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix
from .errors import ValidationError

SUPPORT_SIGMA_FLOOR = 1e-9
_CHUNK_ROWS = 256


@dataclass(frozen=True)
class NeighborIndex:
    """Brute-force Euclidean index over a fixed reference set."""

    points: FeatureMatrix

    @property
    def n_points(self) -> int:
        return self.points.n_rows

    @property
    def dim(self) -> int:
        return self.points.n_cols


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian similarity kernel exp(-||u-j||^2 / (2 bandwidth^2))."""

    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ValidationError(f"kernel bandwidth must be positive, got {self.bandwidth}")


def knn_distances(index: NeighborIndex, query: FeatureMatrix, k: int, exclude_self: bool = False) -> np.ndarray:
    """k smallest reference distances per query row, ascending.

    Ties are broken toward the lower reference index. With
    ``exclude_self=True`` the query rows must be the reference rows in
    order; each row then ignores its own reference entry.
    """
    if query.n_cols != index.dim:
        raise ValidationError(f"query has {query.n_cols} columns, index has {index.dim}")
    available = index.n_points - (1 if exclude_self else 0)
    if exclude_self and query.n_rows != index.n_points:
        raise ValidationError("exclude_self requires the query rows to be the reference rows")
    if k < 1 or k > available:
        raise ValidationError(f"k must lie in [1, {available}], got {k}")
    ref = index.points.values
    out = np.empty((query.n_rows, k))
    for start in range(0, query.n_rows, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, query.n_rows)
        diff = query.values[start:stop, None, :] - ref[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        if exclude_self:
            dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(dist, axis=1, kind="stable")
        out[start:stop] = np.take_along_axis(dist, order[:, :k], axis=1)
    return out


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit Euclidean ball in ``dim`` dimensions."""
    if dim < 1:
        raise ValidationError(f"dim must be at least 1, got {dim}")
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def knn_density(index: NeighborIndex, query: FeatureMatrix, k: int, dim: int, exclude_self: bool = False, distances=None) -> np.ndarray:
    """kNN density estimate k / (n * V_dim * R_k^dim) per query row.

    ``dim`` is the volume exponent and is passed explicitly so callers
    can use the intrinsic data dimension when the ambient one would be
    numerically meaningless. A zero k-th distance (duplicate points) is
    replaced by the smallest positive distance seen in the batch, so
    the estimate stays finite. ``distances`` may carry a precomputed
    result of ``knn_distances`` for the same (index, query, k).
    """
    dists = knn_distances(index, query, k, exclude_self=exclude_self) if distances is None else np.asarray(distances)
    radius = dists[:, k - 1].copy()
    if np.any(radius == 0):
        positive = dists[dists > 0]
        fallback = positive.min() if positive.size else 1.0
        radius[radius == 0] = fallback
    log_density = math.log(k) - math.log(index.n_points) - math.log(unit_ball_volume(dim)) - dim * np.log(radius)
    return np.exp(log_density)


def support_validity(index: NeighborIndex, query: FeatureMatrix, k: int, calibration, distances=None) -> np.ndarray:
    """Score in [0, 1]: 1 when a query is as close to real data as a typical real point.

    ``calibration`` holds the k-th neighbor distances among the real
    points themselves (self-excluded). The score decays with the excess
    of the query's k-th real-neighbor distance over the calibration
    median. The decay scale is the calibration's upper spread, floored
    at the median itself: the raw upper spread collapses for evenly
    sampled data, which would reject every candidate more than a hair
    beyond the sampled region instead of fading out over the same
    distance scale the data itself exhibits.
    """
    calibration = np.asarray(calibration, dtype=np.float64)
    if calibration.size == 0:
        raise ValidationError("calibration must be nonempty")
    rho = float(np.median(calibration))
    sigma = max(float(np.quantile(calibration, 0.9)) - rho, rho, SUPPORT_SIGMA_FLOOR)
    dists = knn_distances(index, query, k) if distances is None else np.asarray(distances)
    excess = np.maximum(dists[:, k - 1] - rho, 0.0)
    return np.exp(-(excess**2) / (2.0 * sigma * sigma))


def similarity(kernel: KernelSpec, u, j) -> float:
    """Gaussian similarity between two feature rows; 1 at u == j, symmetric."""
    u = np.asarray(u, dtype=np.float64)
    j = np.asarray(j, dtype=np.float64)
    if u.shape != j.shape:
        raise ValidationError(f"rows must share a dimension, got {u.shape} vs {j.shape}")
    diff = u - j
    return float(np.exp(-(diff * diff).sum() / (2.0 * kernel.bandwidth**2)))


def similarity_matrix(kernel: KernelSpec, features: FeatureMatrix) -> np.ndarray:
    """Full pairwise similarity matrix with exact unit diagonal."""
    X = features.values
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    S = np.exp(-d2 / (2.0 * kernel.bandwidth**2))
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    return S


def median_pairwise_distance(features: FeatureMatrix) -> float:
    """Median heuristic bandwidth: the median off-diagonal pairwise distance."""
    X = features.values
    if X.shape[0] < 2:
        return 1.0
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    upper = d2[np.triu_indices(X.shape[0], k=1)]
    return max(float(np.median(np.sqrt(upper))), SUPPORT_SIGMA_FLOOR)


def median_knn_distance(features: FeatureMatrix, k: int) -> float:
    """Local median heuristic: the median k-th neighbor distance within a set.

    This is the near-duplicate scale the diversity kernel needs; the
    classic pairwise median sits at the dataset diameter scale instead.
    Uses the quadratic-expansion distance matrix, which is cheaper than
    the exact per-pair form and plenty for a bandwidth heuristic.
    """
    X = features.values
    if X.shape[0] < 2:
        return 1.0
    k = min(k, X.shape[0] - 1)
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return max(float(np.median(np.sqrt(kth))), SUPPORT_SIGMA_FLOOR)
