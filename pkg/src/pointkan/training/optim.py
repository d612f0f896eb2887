"""
SGD with momentum and Adam, both following a cosine learning rate decay
from `lr0` to `lr_min` over `total_epochs`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from pointkan.errors import InvalidArgumentError

OPTIMIZERS = ("sgd_momentum", "adam")

DEFAULT_LR = {"sgd_momentum": 0.01, "adam": 5e-4}


def cosine_lr(lr0: float, lr_min: float, t: float, total: float) -> float:
    if total <= 0:
        return lr0
    t = min(max(t, 0.0), total)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * t / total))


@dataclass
class OptimizerState:
    kind: str = "sgd_momentum"
    lr0: float = 0.01
    lr_min: float = 1e-4
    total_epochs: int = 1
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    epoch: int = 0
    steps: int = 0
    # Moment buffers keyed by parameter name
    buffers: dict[str, tuple[np.ndarray, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            msg = f"Unknown optimizer {self.kind!r}, expecting one of {OPTIMIZERS}"
            raise InvalidArgumentError(msg)
        if self.lr0 < 0 or self.lr_min < 0:
            msg = f"Learning rates must not be negative: lr0={self.lr0}, lr_min={self.lr_min}"
            raise InvalidArgumentError(msg)
        # Never decay upwards from a smaller starting rate
        self.lr_min = min(self.lr_min, self.lr0)

    @classmethod
    def for_kind(cls, kind: str, total_epochs: int, lr0=None, **kwargs):
        if kind not in DEFAULT_LR:
            msg = f"Unknown optimizer {kind!r}, expecting one of {OPTIMIZERS}"
            raise InvalidArgumentError(msg)
        return cls(
            kind,
            DEFAULT_LR[kind] if lr0 is None else lr0,
            total_epochs=total_epochs,
            **kwargs,
        )

    @property
    def lr(self) -> float:
        return cosine_lr(self.lr0, self.lr_min, self.epoch, self.total_epochs)


def optimizer_step(params: dict[str, np.ndarray], grads: dict, state: OptimizerState):
    """
    Updates every array in `params` in place from `grads`, which must hold a
    gradient of the same shape for each of them.
    """
    lr = state.lr
    state.steps += 1
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            msg = f"No gradient for parameter {name!r}"
            raise InvalidArgumentError(msg)
        if g.shape != p.shape:
            msg = f"Gradient for {name!r} has shape {g.shape}, parameter {p.shape}"
            raise InvalidArgumentError(msg)
        if state.weight_decay:
            g = g + state.weight_decay * p

        if state.kind == "sgd_momentum":
            if name not in state.buffers:
                state.buffers[name] = (np.zeros_like(p),)
            (v,) = state.buffers[name]
            v *= state.momentum
            v += g
            p -= lr * v
        else:
            if name not in state.buffers:
                state.buffers[name] = (np.zeros_like(p), np.zeros_like(p))
            m, v = state.buffers[name]
            m *= state.beta1
            m += (1 - state.beta1) * g
            v *= state.beta2
            v += (1 - state.beta2) * g * g
            m_hat = m / (1 - state.beta1**state.steps)
            v_hat = v / (1 - state.beta2**state.steps)
            p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
