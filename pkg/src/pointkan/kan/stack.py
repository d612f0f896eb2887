"""
Pointwise stacks of KAN layers, applied to the last axis of any array.

One stack class covers the three backends: B-spline KAN layers, grouped
rational layers, or an MLP of the same widths (Linear layers with ReLU
between them). Every hidden layer output is batch normalised, which keeps
the next layer's inputs on the spline domain.
"""

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.kan.rational import RationalGroupLayer
from pointkan.kan.spline import KanLayer, SplineGrid
from pointkan.nn import BatchNorm, Linear, Module, ReLU, merge_grads, require_cache

BACKENDS = ("bspline", "rational", "mlp")


def stack_widths(width: int, depth: int, hidden_ratio: float) -> list[int]:
    """Widths of a `width`→`width` stack with `depth` layers"""
    if depth < 1:
        msg = f"KAN stack depth must be at least 1, not {depth}"
        raise InvalidArgumentError(msg)
    hidden = max(1, round(width * hidden_ratio))
    return [width, *([hidden] * (depth - 1)), width]


class KanStack(Module):
    def __init__(
        self,
        widths: list[int],
        rng: np.random.Generator,
        backend="bspline",
        *,
        grid_size=5,
        spline_order=3,
        groups=4,
        degree_num=5,
        degree_den=4,
    ):
        super().__init__()
        if backend not in BACKENDS:
            msg = f"Unknown KAN backend {backend!r}, expecting one of {BACKENDS}"
            raise InvalidArgumentError(msg)
        self.backend = backend
        self.widths = list(widths)
        self.layer_names = []
        grid = SplineGrid(grid_size=grid_size, order=spline_order)
        last = len(widths) - 2
        for i, (d_in, d_out) in enumerate(zip(widths, widths[1:], strict=False)):
            match backend:
                case "bspline":
                    layer = KanLayer(d_in, d_out, rng, grid)
                case "rational":
                    layer = RationalGroupLayer(
                        d_in, d_out, rng, groups, degree_num, degree_den
                    )
                case "mlp":
                    layer = Linear(d_in, d_out, rng)
            self._add(f"layer{i}", layer)
            if i < last:
                self._add(f"norm{i}", BatchNorm(d_out))
                if backend == "mlp":
                    self._add(f"relu{i}", ReLU())

    def _add(self, name, layer):
        self.modules[name] = layer
        self.layer_names.append(name)

    def forward(self, x):
        caches = []
        for name in self.layer_names:
            x, c = self.modules[name].forward(x)
            caches.append(c)
        return x, caches

    def backward(self, dy, cache):
        caches = require_cache(cache, self)
        grads = {}
        for name, c in zip(reversed(self.layer_names), reversed(caches), strict=True):
            dy, g = self.modules[name].backward(dy, c)
            merge_grads(grads, name, g)
        return dy, grads
