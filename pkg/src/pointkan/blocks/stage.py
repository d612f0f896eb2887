"""
One stage of the hierarchy: gather grouped features, Group-Norm with affine
and center concatenation, local processing and max pooling in parallel with
softmax pooling, batch normalisation of their sum, then global processing
of the pooled group vectors.
"""

import numpy as np

from pointkan.blocks.gam import GroupNormAffine, MaxPool, SoftmaxPool
from pointkan.blocks.gfp import KanResidual, ResPBlock
from pointkan.blocks.lfp import DepthwiseConv, Lfp
from pointkan.config import ModelConfig, StageConfig
from pointkan.errors import InvalidArgumentError
from pointkan.kan.stack import KanStack
from pointkan.nn import BatchNorm, Module, check_width, merge_grads, require_cache


def build_kan_stack(
    widths: list[int], backend: str, cfg: ModelConfig, rng: np.random.Generator
) -> KanStack:
    return KanStack(
        widths,
        rng,
        backend,
        grid_size=cfg.grid_size,
        spline_order=cfg.spline_order,
        groups=cfg.rational_groups,
        degree_num=cfg.degree_num,
        degree_den=cfg.degree_den,
    )


def gather_groups(features: np.ndarray, center_idx: np.ndarray, neighbor_idx: np.ndarray):
    """
    Gathers (B, G, K, d) neighbour features and (B, G, d) center features
    from (B, N, d) point features.
    """
    batch = np.arange(len(features))
    neighbors = features[batch[:, None, None], neighbor_idx]
    centers = features[batch[:, None], center_idx]
    return neighbors, centers


def scatter_groups(shape, center_idx, neighbor_idx, d_neighbors, d_centers):
    """Adjoint of `gather_groups`: sums gradients back onto the points"""
    batch = np.arange(shape[0])
    dx = np.zeros(shape)
    np.add.at(dx, (batch[:, None, None], neighbor_idx), d_neighbors)
    np.add.at(dx, (batch[:, None], center_idx), d_centers)
    return dx


class Stage(Module):
    """
    Maps (B, N, d) point features to (B, G, 2d) group features. The forward
    input is `(features, center_idx, neighbor_idx)` with index arrays of
    shape (B, G) and (B, G, K) from the sampling plan.
    """

    def __init__(self, stage: StageConfig, cfg: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.config = stage
        self.width = stage.width
        self.use_spool = cfg.s_pool
        c = stage.out_width

        self.modules["gn"] = GroupNormAffine(stage.width, affine=cfg.gam_affine)
        if cfg.lfp:
            kan = build_kan_stack(stage.kan_widths(), stage.backend, cfg, rng)
            conv = DepthwiseConv(c, stage.dwconv_kernel, rng) if cfg.dwconv else None
            self.modules["lfp"] = Lfp(kan, conv)
        self.modules["norm"] = BatchNorm(c)
        if cfg.gfp:
            for i in range(stage.gfp_blocks):
                if cfg.gfp_kind == "kan":
                    block = KanResidual(
                        build_kan_stack(stage.kan_widths(), stage.backend, cfg, rng)
                    )
                else:
                    block = ResPBlock(c, rng)
                self.modules[f"gfp{i}"] = block
        self.gfp_names = [n for n in self.modules if n.startswith("gfp")]
        self.max_pool = MaxPool()
        self.soft_pool = SoftmaxPool()

    def _check_indices(self, features, center_idx, neighbor_idx):
        check_width(features, self.width, self)
        b, n = features.shape[:2]
        g, k = self.config.centers, self.config.neighbors
        if center_idx.shape != (b, g) or neighbor_idx.shape != (b, g, k):
            msg = (
                f"Stage expects index arrays of shape {(b, g)} and {(b, g, k)},"
                f" not {center_idx.shape} and {neighbor_idx.shape}"
            )
            raise InvalidArgumentError(msg)
        if n < max(g, k):
            msg = f"Stage needs at least {max(g, k)} points, got {n}"
            raise InvalidArgumentError(msg)

    def local_features(self, features, center_idx, neighbor_idx) -> np.ndarray:
        """The (B, G, K, 2d) output of local feature processing"""
        self._check_indices(features, center_idx, neighbor_idx)
        lfp = self.modules.get("lfp")
        if lfp is None:
            msg = "Local feature processing is disabled in this model"
            raise InvalidArgumentError(msg)
        grouped = self.modules["gn"](gather_groups(features, center_idx, neighbor_idx))
        return lfp(grouped)

    def forward(self, x):
        features, center_idx, neighbor_idx = x
        self._check_indices(features, center_idx, neighbor_idx)
        grouped = gather_groups(features, center_idx, neighbor_idx)
        normed, gn_cache = self.modules["gn"].forward(grouped)

        local, lfp_cache = normed, None
        if lfp := self.modules.get("lfp"):
            local, lfp_cache = lfp.forward(normed)
        h, max_cache = self.max_pool.forward(local)
        soft_cache = None
        if self.use_spool:
            soft, soft_cache = self.soft_pool.forward(normed)
            h = h + soft
        h, norm_cache = self.modules["norm"].forward(h)

        gfp_caches = []
        for name in self.gfp_names:
            h, c = self.modules[name].forward(h)
            gfp_caches.append(c)

        cache = (
            features.shape,
            center_idx,
            neighbor_idx,
            gn_cache,
            lfp_cache,
            max_cache,
            soft_cache,
            norm_cache,
            gfp_caches,
        )
        return h, cache

    def backward(self, dy, cache):
        (
            shape,
            center_idx,
            neighbor_idx,
            gn_cache,
            lfp_cache,
            max_cache,
            soft_cache,
            norm_cache,
            gfp_caches,
        ) = require_cache(cache, self)
        grads = {}
        dh = dy
        for name, c in zip(reversed(self.gfp_names), reversed(gfp_caches), strict=True):
            dh, g = self.modules[name].backward(dh, c)
            merge_grads(grads, name, g)
        dh, g = self.modules["norm"].backward(dh, norm_cache)
        merge_grads(grads, "norm", g)

        d_normed, _ = self.max_pool.backward(dh, max_cache)
        if lfp := self.modules.get("lfp"):
            d_normed, g = lfp.backward(d_normed, lfp_cache)
            merge_grads(grads, "lfp", g)
        if self.use_spool:
            d_normed = d_normed + self.soft_pool.backward(dh, soft_cache)[0]

        (d_neighbors, d_centers), g = self.modules["gn"].backward(d_normed, gn_cache)
        merge_grads(grads, "gn", g)
        dx = scatter_groups(shape, center_idx, neighbor_idx, d_neighbors, d_centers)
        return dx, grads
