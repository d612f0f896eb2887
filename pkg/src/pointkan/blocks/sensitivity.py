"""
Per-point sensitivity of the first stage: every point scores the summed L2
norms of the local feature processing outputs at each (group, slot) where it
occurs as a neighbour.
"""

import math
from fractions import Fraction

import numpy as np

from pointkan.blocks.model import PointKan
from pointkan.errors import InvalidArgumentError
from pointkan.geometry import PointCloud, hierarchy_plan


def sensitivity_scores(cloud: PointCloud, model: PointKan) -> np.ndarray:
    """
    Non-negative score per input point; points which fall in no group score
    0. Whether the local features come from KAN layers or an MLP of equal
    widths is decided by the backend the model was built with. A model with
    running statistics is evaluated in evaluation mode, an untrained one on
    the statistics of this cloud, leaving its running statistics unset.
    """
    stage = model.config.stages[0]
    plan = hierarchy_plan(cloud.points, [(stage.centers, stage.neighbors)])
    grouping = plan[0].grouping
    trained = all(buf is not None for _, buf in model.named_buffers())
    was_training = model.training
    saved = [(mod, dict(mod.buffers)) for mod in model.iter_modules()]
    model.train(not trained)
    try:
        features = model.modules["embed"](cloud.points[None])
        local = model.modules["stage1"].local_features(
            features, grouping.center_indices[None], grouping.neighbor_indices[None]
        )
    finally:
        model.train(was_training)
        for mod, buffers in saved:
            mod.buffers.update(buffers)
    norms = np.linalg.norm(local[0], axis=-1)
    scores = np.zeros(len(cloud))
    np.add.at(scores, grouping.neighbor_indices, norms)
    return scores


def flag_count(n: int, percentile: float) -> int:
    """Number of points strictly above the `percentile` threshold, rounded up"""
    if not 0 <= percentile <= 100:
        msg = f"Percentile must be within [0, 100], not {percentile}"
        raise InvalidArgumentError(msg)
    return math.ceil((100 - Fraction(str(percentile))) * n / 100)


def flag_top_points(scores, percentile=80.0) -> np.ndarray:
    """
    Boolean flags marking the ⌈(100 - percentile) / 100 · N⌉ highest scoring
    points, equal scores ranked by point index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    flags = np.zeros(len(scores), dtype=bool)
    flags[order[: flag_count(len(scores), percentile)]] = True
    return flags
