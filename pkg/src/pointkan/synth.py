"""
Synthetic point cloud datasets of simple shapes, sampled uniformly over
their surfaces.

Centrally symmetric shapes are sampled in antipodal pairs, which puts their
centroid exactly at the origin before noise is added.
"""

import logging
import math
from pathlib import Path

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.geometry import PointCloud, centroid_normalize
from pointkan.manifest import DatasetManifest
from pointkan.points_file import save_points_file

log = logging.getLogger(__name__)

MIN_POINTS = 8
TORUS_RADII = (1.0, 0.4)
SHAPES = ("sphere", "cube", "cylinder", "cone", "torus")


def _sphere(n, rng):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cube(n, rng):
    pts = rng.uniform(-1.0, 1.0, size=(n, 3))
    face = rng.integers(0, 3, size=n)
    pts[np.arange(n), face] = 1.0
    return pts


def _cylinder(n, rng):
    # Side area 4π against 2π for both caps
    theta = rng.uniform(0.0, 2 * math.pi, size=n)
    on_side = rng.random(n) < 2.0 / 3.0
    radius = np.where(on_side, 1.0, np.sqrt(rng.random(n)))
    z = np.where(on_side, rng.uniform(-1.0, 1.0, size=n), 1.0)
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])


def _cone(n, rng):
    # Apex at z = 1, base of radius 1 at z = -1
    slant = math.sqrt(5.0)
    theta = rng.uniform(0.0, 2 * math.pi, size=n)
    on_side = rng.random(n) < slant / (slant + 1.0)
    frac = np.sqrt(rng.random(n))
    z = np.where(on_side, 1.0 - 2.0 * frac, -1.0)
    return np.column_stack([frac * np.cos(theta), frac * np.sin(theta), z])


def _torus(n, rng):
    big, small = TORUS_RADII
    accepted = []
    have = 0
    while have < n:
        theta = rng.uniform(0.0, 2 * math.pi, size=2 * n)
        phi = rng.uniform(0.0, 2 * math.pi, size=2 * n)
        # Area element is proportional to the distance from the axis
        keep = rng.random(2 * n) < (big + small * np.cos(phi)) / (big + small)
        theta, phi = theta[keep], phi[keep]
        ring = big + small * np.cos(phi)
        accepted.append(
            np.column_stack(
                [ring * np.cos(theta), ring * np.sin(theta), small * np.sin(phi)]
            )
        )
        have += len(theta)
    return np.concatenate(accepted)[:n]


def _zero_sum_triple(name, rng):
    """Three surface points of a symmetric shape which sum to the origin"""
    if name == "cube":
        # Cyclic coordinate shifts of a point with x + y + z = 0
        a = rng.uniform(-1.0, 0.0)
        p = np.array([1.0, a, -1.0 - a])
        return np.stack([p, np.roll(p, 1), np.roll(p, 2)])
    # Equator points 120° apart
    radius = sum(TORUS_RADII) if name == "torus" else 1.0
    theta = rng.uniform(0.0, 2 * math.pi) + 2 * math.pi / 3 * np.arange(3)
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta), np.zeros(3)])


SAMPLERS = {
    "sphere": (_sphere, True),
    "cube": (_cube, True),
    "cylinder": (_cylinder, True),
    "cone": (_cone, False),
    "torus": (_torus, True),
}


def check_shapes(shapes) -> list[str]:
    shapes = list(shapes)
    if not shapes:
        msg = "No shapes given"
        raise InvalidArgumentError(msg)
    for name in shapes:
        if name not in SAMPLERS:
            msg = f"Unknown shape {name!r}, expecting one of {SHAPES}"
            raise InvalidArgumentError(msg)
    if len(set(shapes)) != len(shapes):
        msg = f"Shapes must not repeat: {shapes}"
        raise InvalidArgumentError(msg)
    return shapes


def sample_shape(
    name: str, num_points: int, noise: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Surface sample of one shape with Gaussian jitter `noise` and a random
    rotation about the vertical axis, centered and scaled to the unit ball.
    """
    check_shapes([name])
    if num_points < MIN_POINTS:
        msg = f"Synthetic clouds need at least {MIN_POINTS} points, not {num_points}"
        raise InvalidArgumentError(msg)
    if not noise >= 0:
        msg = f"Noise must not be negative, not {noise}"
        raise InvalidArgumentError(msg)

    sampler, symmetric = SAMPLERS[name]
    if symmetric:
        # Antipodal pairs keep the centroid on the origin
        half = sampler(num_points // 2 - num_points % 2, rng)
        parts = [half, -half]
        if num_points % 2:
            parts.append(_zero_sum_triple(name, rng))
        pts = np.concatenate(parts)
    else:
        pts = sampler(num_points, rng)
    if noise:
        pts = pts + noise * rng.standard_normal(pts.shape)
    angle = rng.uniform(0.0, 2 * math.pi)
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return centroid_normalize(PointCloud(pts @ rot.T)).points


def synth_clouds(
    shapes, per_class: int, num_points: int, noise: float, rng: np.random.Generator
) -> list[PointCloud]:
    """`per_class` clouds of every shape, labelled by position in `shapes`"""
    shapes = check_shapes(shapes)
    return [
        PointCloud(sample_shape(name, num_points, noise, rng), label)
        for label, name in enumerate(shapes)
        for _ in range(per_class)
    ]


def synth_dataset(
    out: Path,
    shapes,
    per_class: int,
    num_points: int,
    noise: float,
    seed=0,
    test_per_class=0,
) -> tuple[DatasetManifest, DatasetManifest | None]:
    """
    Writes `<out>/<shape>/<split>_<i>.xyz` points files with a
    `train.manifest`, and a `test.manifest` when `test_per_class` is
    positive. Identical arguments give byte-identical files.
    """
    shapes = check_shapes(shapes)
    if per_class < 1 or test_per_class < 0:
        msg = f"Clouds per class must be positive, not {per_class} / {test_per_class}"
        raise InvalidArgumentError(msg)
    rng = np.random.default_rng(seed)
    manifests = []
    for split, count in (("train", per_class), ("test", test_per_class)):
        if not count:
            manifests.append(None)
            continue
        manifest = DatasetManifest(shapes, root=out)
        for label, name in enumerate(shapes):
            for i in range(count):
                rel = f"{name}/{split}_{i:04d}.xyz"
                pts = sample_shape(name, num_points, noise, rng)
                save_points_file(out / rel, PointCloud(pts, label))
                manifest.add(rel, label)
        manifest.save(out / f"{split}.manifest")
        log.info(f"Wrote {len(manifest)} {split} clouds to {out}")
        manifests.append(manifest)
    return manifests[0], manifests[1]
