"""
Local feature processing: a pointwise KAN stack over every grouped feature,
a depthwise convolution along the distance-sorted neighbour axis, and a
residual connection,

    F(f) = f + DwConv(KAN(f))
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.kan.stack import KanStack
from pointkan.nn import Module, check_width, merge_grads, require_cache


def _check_kernel_width(width: int):
    if width < 1 or width % 2 == 0:
        msg = f"Depthwise kernel width must be a positive odd number, not {width}"
        raise InvalidArgumentError(msg)


class DepthwiseConv(Module):
    """
    One 1-D kernel per channel, slid along the K axis of (..., K, C) with
    zero padding of (w - 1) / 2 at each end, plus a per-channel bias.
    """

    def __init__(self, channels: int, kernel_width: int, rng: np.random.Generator):
        super().__init__()
        _check_kernel_width(kernel_width)
        self.channels = channels
        self.kernel_width = kernel_width
        bound = 1.0 / np.sqrt(kernel_width)
        self.params["kernels"] = rng.uniform(-bound, bound, size=(channels, kernel_width))
        self.params["bias"] = np.zeros(channels)

    def _padded(self, x):
        pad = (self.kernel_width - 1) // 2
        widths = [(0, 0)] * (x.ndim - 2) + [(pad, pad), (0, 0)]
        return np.pad(x, widths)

    def forward(self, x):
        check_width(x, self.channels, self)
        if x.ndim < 2:
            msg = f"DepthwiseConv expects a (..., K, C) array, not shape {x.shape}"
            raise InvalidArgumentError(msg)
        k = x.shape[-2]
        xp = self._padded(x)
        kernels = self.params["kernels"]
        y = np.broadcast_to(self.params["bias"], x.shape).copy()
        for t in range(self.kernel_width):
            y += kernels[:, t] * xp[..., t : t + k, :]
        return y, xp

    def backward(self, dy, cache):
        xp = require_cache(cache, self)
        k = dy.shape[-2]
        pad = (self.kernel_width - 1) // 2
        kernels = self.params["kernels"]
        lead = tuple(range(dy.ndim - 1))

        d_kernels = np.empty_like(kernels)
        dxp = np.zeros_like(xp)
        for t in range(self.kernel_width):
            d_kernels[:, t] = np.sum(dy * xp[..., t : t + k, :], axis=lead)
            dxp[..., t : t + k, :] += kernels[:, t] * dy
        grads = {"kernels": d_kernels, "bias": np.sum(dy, axis=lead)}
        return dxp[..., pad : pad + k, :], grads


def dwconv_neighbors(x, kernels, bias) -> np.ndarray:
    """Depthwise convolution of (..., K, C) features with (C, w) kernels"""
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if kernels.ndim != 2 or bias.shape != (kernels.shape[0],):
        msg = f"Kernels {kernels.shape} and bias {bias.shape} do not agree"
        raise InvalidArgumentError(msg)
    _check_kernel_width(kernels.shape[1])
    conv = DepthwiseConv(kernels.shape[0], kernels.shape[1], np.random.default_rng(0))
    conv.params["kernels"] = kernels
    conv.params["bias"] = bias
    return conv(np.asarray(x, dtype=np.float64))


class Lfp(Module):
    """
    Residual local feature block. With `dwconv` off the KAN output is added
    to the input directly.
    """

    def __init__(self, kan: KanStack, conv: DepthwiseConv | None = None):
        super().__init__()
        if kan.widths[0] != kan.widths[-1]:
            msg = f"LFP needs a C→C KAN stack, not {kan.widths[0]}→{kan.widths[-1]}"
            raise InvalidArgumentError(msg)
        if conv is not None and conv.channels != kan.widths[-1]:
            msg = f"Depthwise conv has {conv.channels} channels, KAN stack {kan.widths[-1]}"
            raise InvalidArgumentError(msg)
        self.channels = kan.widths[0]
        self.modules["kan"] = kan
        if conv is not None:
            self.modules["dwconv"] = conv

    def forward(self, x):
        check_width(x, self.channels, self)
        phi, kan_cache = self.modules["kan"].forward(x)
        conv_cache = None
        if conv := self.modules.get("dwconv"):
            phi, conv_cache = conv.forward(phi)
        return x + phi, (kan_cache, conv_cache)

    def backward(self, dy, cache):
        kan_cache, conv_cache = require_cache(cache, self)
        grads = {}
        d_phi = dy
        if conv := self.modules.get("dwconv"):
            d_phi, g = conv.backward(dy, conv_cache)
            merge_grads(grads, "dwconv", g)
        d_kan, g = self.modules["kan"].backward(d_phi, kan_cache)
        merge_grads(grads, "kan", g)
        return dy + d_kan, grads


def lfp_forward(x, kan: KanStack, dw: DepthwiseConv | None) -> np.ndarray:
    return Lfp(kan, dw)(np.asarray(x, dtype=np.float64))
