"""
Point cloud containers, normalisation, farthest point sampling and
K-nearest-neighbour grouping.

Every selection is deterministic: wherever two candidates are equally good
the one with the lexicographically smaller (x, y, z) coordinate triple wins,
then the smaller index. Distances are compared in squared form and reported
as Euclidean distances. Together with an exactly rounded centroid this makes
sampling and grouping invariant under any permutation of the input points.
"""

import math

import numpy as np

from pointkan.errors import InvalidArgumentError, InvalidInputError


class PointCloud:
    __slots__ = "label", "points"

    def __init__(self, points, label: int | None = None):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            msg = f"Expecting an N×3 array of points, not shape {pts.shape}"
            raise InvalidInputError(msg)
        if len(pts) < 1:
            msg = "A point cloud needs at least one point"
            raise InvalidInputError(msg)
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0][0])
            msg = f"Non-finite coordinate in point {bad}: {pts[bad].tolist()}"
            raise InvalidInputError(msg)
        self.points = pts
        self.label = None if label is None else int(label)

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"PointCloud(n={len(self)}, label={self.label})"

    def permuted(self, perm) -> "PointCloud":
        return PointCloud(self.points[np.asarray(perm)], self.label)


class Grouping:
    """
    Result of grouping a source cloud around G centers, with the K nearest
    neighbours of each center sorted by ascending distance.
    """

    __slots__ = "center_indices", "neighbor_dists", "neighbor_indices"

    def __init__(self, center_indices, neighbor_indices, neighbor_dists):
        self.center_indices = np.asarray(center_indices, dtype=np.intp)
        self.neighbor_indices = np.asarray(neighbor_indices, dtype=np.intp)
        self.neighbor_dists = np.asarray(neighbor_dists, dtype=np.float64)


def exact_centroid(points: np.ndarray) -> np.ndarray:
    """
    Centroid using `math.fsum`, which is correctly rounded and so does not
    depend on the order of the points.
    """
    n = len(points)
    return np.array([math.fsum(points[:, c]) / n for c in range(3)])


def centroid_normalize(cloud: PointCloud) -> PointCloud:
    """
    Centers the cloud on its centroid and scales it so that the point
    farthest from the origin has norm 1. A cloud of identical points maps to
    all zeros.
    """
    pts = cloud.points - exact_centroid(cloud.points)
    scale = np.sqrt(np.max(np.sum(pts * pts, axis=1)))
    if scale > 0:
        pts = pts / scale
    else:
        pts = np.zeros_like(pts)
    return PointCloud(pts, cloud.label)


def _best_index(points: np.ndarray, candidates: np.ndarray) -> int:
    """
    Breaks ties among `candidates` by lexicographic coordinates then index.
    """
    if len(candidates) == 1:
        return int(candidates[0])
    sub = points[candidates]
    order = np.lexsort((candidates, sub[:, 2], sub[:, 1], sub[:, 0]))
    return int(candidates[order[0]])


def farthest_point_sample(cloud: PointCloud, count: int) -> np.ndarray:
    """
    Greedy farthest point sampling of `count` distinct indices. The seed is
    the point farthest from the centroid; every later pick maximises the
    minimum distance to the points already picked.
    """
    pts = cloud.points
    n = len(pts)
    if not 1 <= count <= n:
        msg = f"Cannot sample {count} centers from a cloud of {n} points"
        raise InvalidArgumentError(msg)

    delta = pts - exact_centroid(pts)
    seed_d2 = np.sum(delta * delta, axis=1)
    pick = _best_index(pts, np.flatnonzero(seed_d2 == seed_d2.max()))

    selected = np.empty(count, dtype=np.intp)
    min_d2 = np.full(n, np.inf)
    for i in range(count):
        selected[i] = pick
        delta = pts - pts[pick]
        min_d2 = np.minimum(min_d2, np.sum(delta * delta, axis=1))
        # Already chosen points can never be chosen again, even when
        # duplicated coordinates leave every remaining distance at zero
        min_d2[selected[: i + 1]] = -1.0
        if i + 1 < count:
            pick = _best_index(pts, np.flatnonzero(min_d2 == min_d2.max()))
    return selected


def knn_group(cloud: PointCloud, centers, k: int) -> Grouping:
    """
    For each center the `k` nearest points of the cloud, nearest first. The
    center itself is eligible and, at distance zero, comes first.
    """
    pts = cloud.points
    n = len(pts)
    if not 1 <= k <= n:
        msg = f"Cannot take {k} neighbours from a cloud of {n} points"
        raise InvalidArgumentError(msg)
    centers = np.asarray(centers, dtype=np.intp)
    if centers.ndim != 1 or np.any(centers < 0) or np.any(centers >= n):
        msg = f"Center indices must be valid indices into a cloud of {n} points"
        raise InvalidArgumentError(msg)

    delta = pts[None, :, :] - pts[centers][:, None, :]
    d2 = np.sum(delta * delta, axis=2)
    shape = d2.shape
    idx = np.broadcast_to(np.arange(n), shape)
    xs, ys, zs = (np.broadcast_to(pts[:, c], shape) for c in range(3))

    # Sort keys, least significant first
    order = np.lexsort((idx, zs, ys, xs, d2), axis=-1)[:, :k]
    nearest_d2 = np.take_along_axis(d2, order, axis=1)
    return Grouping(centers, order, np.sqrt(nearest_d2))


class StagePlan:
    """Sampling and grouping for one stage of the hierarchy"""

    __slots__ = "grouping", "xyz"

    def __init__(self, grouping: Grouping, xyz: np.ndarray):
        self.grouping = grouping
        # Coordinates of the centers, which are the next stage's points
        self.xyz = xyz


def hierarchy_plan(xyz: np.ndarray, stages) -> list[StagePlan]:
    """
    Builds the sampling plan for one cloud: FPS then KNN at every stage, each
    stage working on the centers of the one before. `stages` is a sequence of
    `(centers, neighbors)` pairs.

    Plans depend only on coordinates, so they can be computed once per cloud
    and reused every epoch.
    """
    plan = []
    for centers, neighbors in stages:
        cloud = PointCloud(xyz)
        idx = farthest_point_sample(cloud, centers)
        grouping = knn_group(cloud, idx, neighbors)
        xyz = xyz[idx]
        plan.append(StagePlan(grouping, xyz))
    return plan


def translate_scale(cloud: PointCloud, rng: np.random.Generator) -> PointCloud:
    """Random anisotropic scaling in [2/3, 3/2] and translation in [-0.2, 0.2]"""
    scale = rng.uniform(2.0 / 3.0, 3.0 / 2.0, size=3)
    shift = rng.uniform(-0.2, 0.2, size=3)
    return PointCloud(cloud.points * scale + shift, cloud.label)


def drop_points(
    cloud: PointCloud, rng: np.random.Generator, max_ratio: float = 0.875
) -> PointCloud:
    """
    Drops a random fraction (up to `max_ratio`) of the points, replacing each
    dropped point by the first point so that N is unchanged.
    """
    ratio = rng.random() * max_ratio
    drop = np.flatnonzero(rng.random(len(cloud)) <= ratio)
    pts = cloud.points.copy()
    if len(drop):
        pts[drop] = pts[0]
    return PointCloud(pts, cloud.label)


def jitter(
    cloud: PointCloud,
    rng: np.random.Generator,
    sigma: float = 0.01,
    clip: float = 0.05,
) -> PointCloud:
    """Adds clipped isotropic Gaussian noise to every coordinate"""
    noise = np.clip(sigma * rng.standard_normal(cloud.points.shape), -clip, clip)
    return PointCloud(cloud.points + noise, cloud.label)


PERTURBATIONS = {
    "translate-scale": translate_scale,
    "dropout": drop_points,
    "noise": jitter,
}
