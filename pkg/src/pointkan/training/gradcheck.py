"""
Compares analytic gradients against central finite differences of the
scalar objective `L = sum(r * y)` for a fixed random `r`.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from pointkan.blocks.gam import GroupNormAffine, SoftmaxPool
from pointkan.blocks.gfp import ResPBlock
from pointkan.blocks.lfp import DepthwiseConv, Lfp
from pointkan.blocks.model import CloudBatch, PointKan
from pointkan.config import ModelConfig, StageConfig
from pointkan.geometry import PointCloud
from pointkan.kan.rational import RationalGroupLayer
from pointkan.kan.spline import KanLayer, SplineGrid
from pointkan.kan.stack import BACKENDS, KanStack, stack_widths
from pointkan.nn import Module

log = logging.getLogger(__name__)

MIN_COORDINATES = 20
# One-sided differences disagreeing by more than this sit across a kink
KINK_TOL = 1e-3
REFINE = 10


@dataclass(frozen=True)
class BlockCheck:
    name: str
    coordinates: int
    max_error: float
    skipped: int = 0

    def passed(self, tol: float) -> bool:
        # Every coordinate on a kink leaves nothing checked
        return self.max_error < tol and (self.coordinates > 0 or self.skipped == 0)


@dataclass
class GradCheckReport:
    label: str
    tol: float
    blocks: list[BlockCheck] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max((b.max_error for b in self.blocks), default=0.0)

    @property
    def passed(self) -> bool:
        return all(b.passed(self.tol) for b in self.blocks)

    def failures(self) -> list[BlockCheck]:
        return [b for b in self.blocks if not b.passed(self.tol)]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)


def _step(value: float) -> float:
    return 1e-5 * max(1.0, abs(value))


def _differences(objective, arr, idx, h, base):
    """Forward and backward one-sided differences at step `h`"""
    orig = arr[idx]
    arr[idx] = orig + h
    up = objective()
    arr[idx] = orig - h
    down = objective()
    arr[idx] = orig
    return (up - base) / h, (base - down) / h


def numeric_derivative(objective, arr, idx, base, tol) -> float | None:
    """
    Central difference estimate of d objective / d arr[idx], or None when
    the coordinate lies too close to a kink for the estimate to be trusted.

    A kink inside the step makes the central estimate miss by half the gap
    between the one-sided differences. Gaps within `tol` are accepted as
    they are; larger ones are re-measured at a tenth of the step. A smooth
    function shrinks the gap tenfold and leaves the central estimate where
    it was, while a kink does neither.
    """
    h = _step(arr[idx])
    fwd, bwd = _differences(objective, arr, idx, h, base)
    gap = abs(fwd - bwd)
    scale = max(1.0, abs(fwd), abs(bwd))
    if gap > KINK_TOL * scale:
        return None
    numeric = (fwd + bwd) / 2
    if gap <= tol * scale:
        return numeric

    fine_fwd, fine_bwd = _differences(objective, arr, idx, h / REFINE, base)
    fine = (fine_fwd + fine_bwd) / 2
    if abs(fine_fwd - fine_bwd) > gap / 2 or abs(fine - numeric) > tol * scale / 2:
        return None
    return fine


def _has_missing_statistics(module: Module) -> bool:
    return any(arr is None for _, arr in module.named_buffers())


def _float_inputs(x):
    if isinstance(x, np.ndarray):
        return [("input", x)]
    if isinstance(x, tuple) and all(
        isinstance(a, np.ndarray) and a.dtype.kind == "f" for a in x
    ):
        return [(f"input{i}", a) for i, a in enumerate(x)]
    return []


def grad_check(
    module: Module,
    x,
    tol=1e-5,
    *,
    seed=0,
    samples=MIN_COORDINATES,
    freeze_statistics=True,
    label=None,
) -> GradCheckReport:
    """
    Checks every parameter block of `module`, and the input gradient when
    the input is an array or a tuple of arrays. Up to `samples` seeded
    coordinates are checked per block; smaller blocks are checked in full.
    A coordinate lying across a ReLU or max pooling kink is skipped in
    favour of another (see `numeric_derivative`); a block with no
    coordinate left to check fails.

    With `freeze_statistics` batch normalisation runs in evaluation mode,
    its running statistics first primed by one training mode forward pass
    if they do not yet exist.
    """
    if freeze_statistics:
        if _has_missing_statistics(module):
            module.train()
            module.forward(x)
        module.eval()
    else:
        module.train()

    rng = np.random.default_rng(seed)
    y, cache = module.forward(x)
    weights = rng.standard_normal(y.shape)
    dx, grads = module.backward(weights, cache)

    def objective():
        return float(np.sum(weights * module(x)))

    blocks = [(name, arr, grads[name]) for name, arr in module.named_parameters()]
    inputs = _float_inputs(x)
    d_inputs = dx if len(inputs) > 1 else (dx,)
    for (name, arr), d_arr in zip(inputs, d_inputs, strict=False):
        blocks.append((name, arr, d_arr))

    base = objective()
    report = GradCheckReport(label or module.__class__.__name__, tol)
    for name, arr, analytic in blocks:
        checked = skipped = 0
        worst = 0.0
        for flat_idx in rng.permutation(arr.size):
            if checked == samples:
                break
            idx = np.unravel_index(flat_idx, arr.shape)
            numeric = numeric_derivative(objective, arr, idx, base, tol)
            if numeric is None:
                skipped += 1
                continue
            worst = max(worst, relative_error(float(analytic[idx]), numeric))
            checked += 1
        report.blocks.append(BlockCheck(name, checked, worst, skipped))
        log.debug(
            f"{report.label} {name}: {checked} coordinates, {skipped} on kinks,"
            f" max error {worst:.3e}"
        )
    return report


# Random small configurations for the gradient check suite. Each builder
# takes a seeded generator and returns (label, module, input).


def _kan_layer_case(rng):
    d_in, d_out = int(rng.integers(1, 5)), int(rng.integers(1, 4))
    grid = SplineGrid(grid_size=int(rng.choice([3, 5, 8])), order=3)
    layer = KanLayer(d_in, d_out, rng, grid)
    layer.params["scale_base"] = rng.normal(size=(d_in, d_out))
    layer.params["scale_spline"] = rng.normal(size=(d_in, d_out))
    layer.params["spline_coeffs"] = rng.normal(size=layer.params["spline_coeffs"].shape)
    x = rng.uniform(-1.2, 1.2, size=(3, d_in))
    return f"kan_layer {d_in}→{d_out} grid {grid.grid_size}", layer, x


def _rational_case(rng):
    groups = int(rng.integers(1, 3))
    d_in = groups * int(rng.integers(1, 3))
    d_out = int(rng.integers(1, 4))
    m, n = int(rng.choice([3, 5])), int(rng.choice([2, 4]))
    layer = RationalGroupLayer(d_in, d_out, rng, groups, m, n)
    layer.params["numerator"] = rng.normal(0.0, 0.5, size=(groups, m + 1))
    layer.params["denominator"] = rng.normal(0.0, 0.5, size=n)
    x = rng.uniform(-1.5, 1.5, size=(3, d_in))
    return f"rational {d_in}→{d_out} g={groups} m={m} n={n}", layer, x


def _group_norm_case(rng):
    b, g, k, d = (int(rng.integers(1, hi)) for hi in (3, 5, 7, 5))
    k = max(k, 2)
    gn = GroupNormAffine(d)
    gn.params["alpha"] = rng.normal(1.0, 0.3, size=2 * d)
    gn.params["beta"] = rng.normal(0.0, 0.3, size=2 * d)
    x = (rng.normal(size=(b, g, k, d)), rng.normal(size=(b, g, d)))
    return f"group_norm_affine G={g} K={k} d={d}", gn, x


def _s_pool_case(rng):
    g, k, c = int(rng.integers(1, 5)), int(rng.integers(1, 7)), int(rng.integers(1, 9))
    return f"s_pool G={g} K={k} C={c}", SoftmaxPool(), rng.normal(size=(2, g, k, c))


def _dwconv_case(rng):
    c, k = int(rng.integers(1, 9)), int(rng.integers(1, 7))
    w = int(rng.choice([1, 3, 5]))
    conv = DepthwiseConv(c, w, rng)
    conv.params["bias"] = rng.normal(size=c)
    return f"dwconv C={c} K={k} w={w}", conv, rng.normal(size=(2, 3, k, c))


def _lfp_case(rng):
    backend = str(rng.choice(BACKENDS))
    c = int(rng.choice([4, 8]))
    kan = KanStack(stack_widths(c, 3, 0.5), rng, backend, groups=2)
    conv = DepthwiseConv(c, 3, rng)
    conv.params["bias"] = rng.normal(size=c)
    x = rng.uniform(-1.0, 1.0, size=(2, int(rng.integers(1, 5)), int(rng.integers(1, 7)), c))
    return f"lfp {backend} C={c}", Lfp(kan, conv), x


def _resp_case(rng):
    c = int(rng.integers(2, 9))
    block = ResPBlock(c, rng)
    block.modules["fc2"].params["bias"] = rng.normal(size=c)
    return f"resp C={c}", block, rng.normal(size=(8, c))


def miniature_config(backend="bspline", num_classes=3, **toggles) -> ModelConfig:
    """Two stage model on 32 points, small enough for full gradient checks"""
    stages = [
        StageConfig(8, 4, 4, backend),
        StageConfig(4, 4, 8, backend),
    ]
    return ModelConfig(
        32,
        num_classes,
        stages,
        embed_dim=4,
        head_hidden=8,
        rational_groups=2,
        **toggles,
    )


def _model_case(rng):
    backend = str(rng.choice(BACKENDS))
    cfg = miniature_config(backend)
    model = PointKan(cfg, seed=int(rng.integers(1 << 31)))
    clouds = [PointCloud(rng.uniform(-1.0, 1.0, size=(32, 3))) for _ in range(2)]
    return f"model {backend}", model, CloudBatch.from_clouds(clouds, cfg)


SUITE = {
    "kan_layer": _kan_layer_case,
    "rational_layer": _rational_case,
    "group_norm_affine": _group_norm_case,
    "s_pool": _s_pool_case,
    "dwconv": _dwconv_case,
    "lfp": _lfp_case,
    "resp": _resp_case,
    "model": _model_case,
}


def gradcheck_suite(seed=0, cases=13, tol=1e-5, kinds=None):
    """Yields one report per seeded configuration of every kind"""
    for kind_index, kind in enumerate(SUITE):
        if kinds and kind not in kinds:
            continue
        for case in range(cases):
            rng = np.random.default_rng([seed, kind_index, case])
            label, module, x = SUITE[kind](rng)
            yield kind, grad_check(
                module, x, tol, seed=int(rng.integers(1 << 31)), label=label
            )
