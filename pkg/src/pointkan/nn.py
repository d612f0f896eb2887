"""
Reverse-mode building blocks.

Every module follows one contract:

    y, cache = module.forward(x)
    dx, grads = module.backward(dy, cache)

`cache` is owned by the caller, so one module can evaluate many inputs
concurrently. `grads` is a flat dict keyed by the dotted parameter names that
`named_parameters()` yields, relative to the module the call was made on.
"""

from collections.abc import Iterator

import numpy as np

from pointkan.errors import InvalidArgumentError, UsageError


def require_cache(cache, owner):
    if cache is None:
        msg = f"{owner.__class__.__name__}.backward() called without a forward cache"
        raise UsageError(msg)
    return cache


def merge_grads(into: dict, prefix: str, grads: dict) -> dict:
    for name, g in grads.items():
        into[f"{prefix}.{name}"] = g
    return into


def check_width(x: np.ndarray, width: int, owner) -> None:
    if x.ndim < 1 or x.shape[-1] != width:
        msg = (
            f"{owner.__class__.__name__} expects {width} input channels,"
            f" got shape {x.shape}"
        )
        raise InvalidArgumentError(msg)


class Module:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray | None] = {}
        self.modules: dict[str, Module] = {}
        self.training = True

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy, cache):
        raise NotImplementedError

    def __call__(self, x):
        y, _ = self.forward(x)
        return y

    def named_parameters(self, prefix="") -> Iterator[tuple[str, np.ndarray]]:
        for name, arr in self.params.items():
            yield prefix + name, arr
        for name, mod in self.modules.items():
            yield from mod.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix="") -> Iterator[tuple[str, np.ndarray | None]]:
        for name, arr in self.buffers.items():
            yield prefix + name, arr
        for name, mod in self.modules.items():
            yield from mod.named_buffers(f"{prefix}{name}.")

    def iter_modules(self) -> Iterator["Module"]:
        yield self
        for mod in self.modules.values():
            yield from mod.iter_modules()

    def parameter_count(self) -> int:
        return sum(arr.size for _, arr in self.named_parameters())

    def train(self, mode=True):
        self.training = mode
        for mod in self.modules.values():
            mod.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def reset_running_stats(self):
        for mod in self.modules.values():
            mod.reset_running_stats()


class Linear(Module):
    """Affine map on the last axis, `y = x W + b`"""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        super().__init__()
        if d_in < 1 or d_out < 1:
            msg = f"Linear layer dimensions must be positive, not {d_in}→{d_out}"
            raise InvalidArgumentError(msg)
        self.d_in = d_in
        self.d_out = d_out
        bound = 1.0 / np.sqrt(d_in)
        self.params["weight"] = rng.uniform(-bound, bound, size=(d_in, d_out))
        self.params["bias"] = np.zeros(d_out)

    def forward(self, x):
        check_width(x, self.d_in, self)
        return x @ self.params["weight"] + self.params["bias"], x

    def backward(self, dy, cache):
        x = require_cache(cache, self)
        flat_x = x.reshape(-1, self.d_in)
        flat_dy = dy.reshape(-1, self.d_out)
        grads = {
            "weight": flat_x.T @ flat_dy,
            "bias": flat_dy.sum(axis=0),
        }
        return dy @ self.params["weight"].T, grads


class ReLU(Module):
    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, dy, cache):
        mask = require_cache(cache, self)
        return np.where(mask, dy, 0.0), {}


class BatchNorm(Module):
    """
    Batch normalisation over every axis except the last (channel) axis.
    Training mode normalises with batch statistics and updates the running
    statistics; evaluation mode uses the running statistics.
    """

    def __init__(self, channels: int, momentum=0.1, eps=1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.buffers["running_mean"] = None
        self.buffers["running_var"] = None

    def reset_running_stats(self):
        self.buffers["running_mean"] = np.zeros(self.channels)
        self.buffers["running_var"] = np.ones(self.channels)

    @property
    def has_statistics(self):
        return self.buffers["running_mean"] is not None

    def forward(self, x):
        check_width(x, self.channels, self)
        gamma = self.params["gamma"]
        beta = self.params["beta"]
        if self.training:
            flat = x.reshape(-1, self.channels)
            n = len(flat)
            mean = flat.mean(axis=0)
            var = flat.var(axis=0)
            self._update_running(mean, var * n / (n - 1) if n > 1 else var)
        else:
            if not self.has_statistics:
                msg = "BatchNorm in evaluation mode has no running statistics"
                raise UsageError(msg)
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        return gamma * x_hat + beta, (x_hat, inv_std, self.training)

    def _update_running(self, mean, var):
        if not self.has_statistics:
            self.reset_running_stats()
        m = self.momentum
        rm = self.buffers["running_mean"]
        rv = self.buffers["running_var"]
        self.buffers["running_mean"] = (1 - m) * rm + m * mean
        self.buffers["running_var"] = (1 - m) * rv + m * var

    def backward(self, dy, cache):
        x_hat, inv_std, batch_stats = require_cache(cache, self)
        flat_dy = dy.reshape(-1, self.channels)
        flat_xh = x_hat.reshape(-1, self.channels)
        grads = {
            "gamma": np.sum(flat_dy * flat_xh, axis=0),
            "beta": flat_dy.sum(axis=0),
        }
        dx_hat = dy * self.params["gamma"]
        if batch_stats:
            flat_dxh = dx_hat.reshape(-1, self.channels)
            dx = inv_std * (
                dx_hat
                - flat_dxh.mean(axis=0)
                - x_hat * np.mean(flat_dxh * flat_xh, axis=0)
            )
        else:
            dx = dx_hat * inv_std
        return dx, grads


class Sequential(Module):
    """Named modules applied in insertion order"""

    def __init__(self, *layers: tuple[str, Module]):
        super().__init__()
        for name, mod in layers:
            self.modules[name] = mod

    def forward(self, x):
        caches = []
        for mod in self.modules.values():
            x, c = mod.forward(x)
            caches.append(c)
        return x, caches

    def backward(self, dy, cache):
        caches = require_cache(cache, self)
        grads = {}
        for (name, mod), c in zip(
            reversed(self.modules.items()), reversed(caches), strict=True
        ):
            dy, g = mod.backward(dy, c)
            merge_grads(grads, name, g)
        return dy, grads
