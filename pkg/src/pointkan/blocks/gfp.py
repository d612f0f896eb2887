"""
Global feature processing blocks, applied to the pooled per-group vectors.
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.kan.stack import KanStack
from pointkan.nn import BatchNorm, Linear, Module, ReLU, Sequential, merge_grads, require_cache


class ResPBlock(Sequential):
    """
    Residual MLP block `x + W2 relu(bn(W1 x + b1)) + b2`. Batch statistics are
    taken over every row of the input, so a (B, G, C) array normalises over
    B × G.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__(
            ("fc1", Linear(channels, channels, rng)),
            ("bn", BatchNorm(channels)),
            ("relu", ReLU()),
            ("fc2", Linear(channels, channels, rng)),
        )
        self.channels = channels

    def forward(self, x):
        y, cache = super().forward(x)
        return x + y, cache

    def backward(self, dy, cache):
        dx, grads = super().backward(dy, cache)
        return dy + dx, grads


def resp_block_forward(x, block: ResPBlock) -> np.ndarray:
    return block(np.asarray(x, dtype=np.float64))


class KanResidual(Module):
    """`x + KAN(x)`, the KAN alternative to a ResP block"""

    def __init__(self, kan: KanStack):
        super().__init__()
        if kan.widths[0] != kan.widths[-1]:
            msg = (
                "Residual KAN block needs a C→C stack,"
                f" not {kan.widths[0]}→{kan.widths[-1]}"
            )
            raise InvalidArgumentError(msg)
        self.modules["kan"] = kan

    def forward(self, x):
        y, cache = self.modules["kan"].forward(x)
        return x + y, cache

    def backward(self, dy, cache):
        dx, g = self.modules["kan"].backward(dy, require_cache(cache, self))
        return dy + dx, merge_grads({}, "kan", g)
