"""
Geometric affine module: Group-Norm with a learnable affine transform and
center feature concatenation, and softmax pooling over each group.
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.geometry import Grouping
from pointkan.nn import Module, require_cache

EPSILON = 1e-5


class GroupedFeatures:
    """
    Features gathered for G groups of K neighbours: `features` has shape
    (..., G, K, C) and `centers` (..., G, C).
    """

    __slots__ = "centers", "features", "geometry"

    def __init__(self, features, centers, geometry: Grouping | None = None):
        features = np.asarray(features, dtype=np.float64)
        centers = np.asarray(centers, dtype=np.float64)
        if (
            features.ndim < 3
            or features.shape[:-2] != centers.shape[:-1]
            or features.shape[-1] != centers.shape[-1]
        ):
            msg = (
                f"Grouped feature shape {features.shape} does not match"
                f" center shape {centers.shape}"
            )
            raise InvalidArgumentError(msg)
        self.features = features
        self.centers = centers
        self.geometry = geometry

    @property
    def width(self) -> int:
        return self.features.shape[-1]


class AffineParams:
    """
    Learnable alpha, beta of length 2d. The leading d entries scale and
    shift the normalised features; the center features are concatenated
    unchanged.
    """

    __slots__ = "alpha", "beta"

    def __init__(self, alpha, beta):
        self.alpha = np.asarray(alpha, dtype=np.float64)
        self.beta = np.asarray(beta, dtype=np.float64)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            msg = (
                f"alpha {self.alpha.shape} and beta {self.beta.shape}"
                " must be equal length vectors"
            )
            raise InvalidArgumentError(msg)
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            msg = "Affine parameters must be finite"
            raise InvalidArgumentError(msg)

    @property
    def epsilon(self) -> float:
        return EPSILON

    @classmethod
    def identity(cls, width: int) -> "AffineParams":
        return cls(np.ones(2 * width), np.zeros(2 * width))


class GroupNormAffine(Module):
    """
    For every group: subtract the center feature, divide by the square root
    of the scalar variance of all K × d deviations plus epsilon, apply
    `alpha * x + beta`, then concatenate the center feature, giving 2d
    channels.
    """

    def __init__(self, width: int, affine=True):
        super().__init__()
        self.width = width
        self.affine = affine
        if affine:
            self.params["alpha"] = np.ones(2 * width)
            self.params["beta"] = np.zeros(2 * width)

    def forward(self, x):
        features, centers = x
        d = self.width
        if features.shape[-1] != d or centers.shape[-1] != d:
            msg = (
                f"GroupNormAffine expects width {d}, got features {features.shape}"
                f" and centers {centers.shape}"
            )
            raise InvalidArgumentError(msg)
        dev = features - centers[..., None, :]
        mu = dev.mean(axis=(-2, -1), keepdims=True)
        var = np.mean((dev - mu) ** 2, axis=(-2, -1), keepdims=True)
        sigma = np.sqrt(var + EPSILON)
        normed = dev / sigma
        if self.affine:
            out = self.params["alpha"][:d] * normed + self.params["beta"][:d]
        else:
            out = normed
        ctr = np.broadcast_to(centers[..., None, :], dev.shape)
        return np.concatenate([out, ctr], axis=-1), (dev, mu, sigma, normed)

    def backward(self, dy, cache):
        dev, mu, sigma, normed = require_cache(cache, self)
        d = self.width
        d_out = dy[..., :d]
        d_ctr = dy[..., d:].sum(axis=-2)

        grads = {}
        if self.affine:
            lead = tuple(range(d_out.ndim - 1))
            zeros = np.zeros(d)
            grads["alpha"] = np.concatenate([np.sum(d_out * normed, axis=lead), zeros])
            grads["beta"] = np.concatenate([np.sum(d_out, axis=lead), zeros])
            d_normed = d_out * self.params["alpha"][:d]
        else:
            d_normed = d_out

        m = dev.shape[-2] * dev.shape[-1]
        proj = np.sum(d_normed * dev, axis=(-2, -1), keepdims=True)
        d_dev = d_normed / sigma - (dev - mu) * proj / (m * sigma**3)
        d_features = d_dev
        d_centers = d_ctr - d_dev.sum(axis=-2)
        return (d_features, d_centers), grads


def group_norm_affine(gf: GroupedFeatures, params: AffineParams) -> np.ndarray:
    """Group-Norm of `gf` with the given affine parameters, width 2d"""
    d = gf.width
    if params.alpha.shape != (2 * d,):
        msg = f"Affine parameters of length {len(params.alpha)} do not match width 2×{d}"
        raise InvalidArgumentError(msg)
    gn = GroupNormAffine(d)
    gn.params["alpha"] = params.alpha
    gn.params["beta"] = params.beta
    return gn((gf.features, gf.centers))


class SoftmaxPool(Module):
    """
    Pools the K axis of (..., K, C) with per-channel softmax weights of the
    values themselves, `sum_j softmax(x)_j x_j`.
    """

    def forward(self, x):
        shifted = x - x.max(axis=-2, keepdims=True)
        e = np.exp(shifted)
        weights = e / e.sum(axis=-2, keepdims=True)
        out = np.sum(weights * x, axis=-2)
        return out, (x, weights, out)

    def backward(self, dy, cache):
        x, weights, out = require_cache(cache, self)
        dx = dy[..., None, :] * weights * (1.0 + x - out[..., None, :])
        return dx, {}


def s_pool(x) -> np.ndarray:
    return SoftmaxPool()(np.asarray(x, dtype=np.float64))


class MaxPool(Module):
    """Max over the K axis of (..., K, C); ties go to the first neighbour"""

    def forward(self, x):
        idx = np.argmax(x, axis=-2)[..., None, :]
        return np.take_along_axis(x, idx, axis=-2)[..., 0, :], (x.shape, idx)

    def backward(self, dy, cache):
        shape, idx = require_cache(cache, self)
        dx = np.zeros(shape)
        np.put_along_axis(dx, idx, dy[..., None, :], axis=-2)
        return dx, {}
