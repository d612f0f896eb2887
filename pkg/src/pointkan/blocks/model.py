"""
The point cloud classifier: a shared per-point linear embedding, the stages
of the hierarchy, global max and mean pooling over the final groups, and a
two layer classification head producing raw class scores.
"""

import logging

import numpy as np

from pointkan.blocks.gam import MaxPool
from pointkan.blocks.stage import Stage
from pointkan.config import ModelConfig
from pointkan.errors import InvalidArgumentError
from pointkan.geometry import PointCloud, StagePlan, hierarchy_plan
from pointkan.nn import Linear, Module, ReLU, Sequential, merge_grads, require_cache

log = logging.getLogger(__name__)


class CloudBatch:
    """
    B clouds of the same size stacked into a (B, N, 3) array, together with
    the sampling plan of each cloud and optional labels.
    """

    __slots__ = "labels", "plans", "xyz"

    def __init__(self, xyz, plans: list[list[StagePlan]], labels=None):
        self.xyz = np.asarray(xyz, dtype=np.float64)
        self.plans = plans
        self.labels = None if labels is None else np.asarray(labels, dtype=np.intp)
        if len(self.plans) != len(self.xyz):
            msg = f"{len(self.plans)} sampling plans for {len(self.xyz)} clouds"
            raise InvalidArgumentError(msg)

    def __len__(self):
        return len(self.xyz)

    @classmethod
    def from_clouds(cls, clouds: list[PointCloud], cfg: ModelConfig, plans=None):
        if not clouds:
            msg = "Cannot batch an empty list of clouds"
            raise InvalidArgumentError(msg)
        sizes = {len(c) for c in clouds}
        if len(sizes) > 1:
            msg = f"Clouds in a batch must have the same number of points, got {sorted(sizes)}"
            raise InvalidArgumentError(msg)
        if plans is None:
            plans = [hierarchy_plan(c.points, cfg.stage_plan()) for c in clouds]
        labels = None
        if all(c.label is not None for c in clouds):
            labels = [c.label for c in clouds]
        return cls(np.stack([c.points for c in clouds]), plans, labels)

    def stage_indices(self, stage: int):
        """(B, G) center and (B, G, K) neighbour indices for one stage"""
        centers = np.stack([p[stage].grouping.center_indices for p in self.plans])
        neighbors = np.stack([p[stage].grouping.neighbor_indices for p in self.plans])
        return centers, neighbors


class PointKan(Module):
    def __init__(self, cfg: ModelConfig, seed=0):
        super().__init__()
        self.config = cfg
        rng = np.random.default_rng(seed)
        self.modules["embed"] = Linear(3, cfg.embed_dim, rng)
        for i, stage_cfg in enumerate(cfg.stages, start=1):
            self.modules[f"stage{i}"] = Stage(stage_cfg, cfg, rng)
        self.stage_names = [f"stage{i}" for i in range(1, len(cfg.stages) + 1)]
        self.modules["head"] = Sequential(
            ("fc1", Linear(2 * cfg.out_width, cfg.head_hidden, rng)),
            ("relu", ReLU()),
            ("fc2", Linear(cfg.head_hidden, cfg.num_classes, rng)),
        )
        self.global_max = MaxPool()
        log.debug(f"PointKan {cfg.backend} model with {self.parameter_count()} parameters")

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    def forward(self, x: CloudBatch):
        """Class scores of shape (B, num_classes) for a `CloudBatch`"""
        h, embed_cache = self.modules["embed"].forward(x.xyz)
        stage_caches = []
        for i, name in enumerate(self.stage_names):
            centers, neighbors = x.stage_indices(i)
            h, c = self.modules[name].forward((h, centers, neighbors))
            stage_caches.append(c)

        pooled_max, max_cache = self.global_max.forward(h)
        pooled = np.concatenate([pooled_max, h.mean(axis=1)], axis=-1)
        scores, head_cache = self.modules["head"].forward(pooled)
        return scores, (embed_cache, stage_caches, max_cache, h.shape[1], head_cache)

    def backward(self, dy, cache):
        embed_cache, stage_caches, max_cache, groups, head_cache = require_cache(
            cache, self
        )
        grads = {}
        d_pooled, g = self.modules["head"].backward(dy, head_cache)
        merge_grads(grads, "head", g)

        width = self.config.out_width
        dh, _ = self.global_max.backward(d_pooled[:, :width], max_cache)
        dh = dh + d_pooled[:, None, width:] / groups
        for name, c in zip(reversed(self.stage_names), reversed(stage_caches), strict=True):
            dh, g = self.modules[name].backward(dh, c)
            merge_grads(grads, name, g)

        d_xyz, g = self.modules["embed"].backward(dh, embed_cache)
        merge_grads(grads, "embed", g)
        return d_xyz, grads

    def scores(self, clouds: list[PointCloud]) -> np.ndarray:
        return self(CloudBatch.from_clouds(clouds, self.config))

    def predict(self, clouds: list[PointCloud]) -> np.ndarray:
        return np.argmax(self.scores(clouds), axis=1)


def model_forward(cloud: PointCloud, cfg: ModelConfig, model: PointKan) -> np.ndarray:
    """Raw class scores of a single cloud"""
    if cfg.num_classes != model.num_classes:
        msg = (
            f"Config has {cfg.num_classes} classes but the model scores"
            f" {model.num_classes}"
        )
        raise InvalidArgumentError(msg)
    if cfg != model.config:
        msg = "Config does not match the architecture of the model"
        raise InvalidArgumentError(msg)
    return model.scores([cloud])[0]
