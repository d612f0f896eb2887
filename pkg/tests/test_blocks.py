import math

import numpy as np
import pytest

from pointkan.blocks.gam import (
    EPSILON,
    AffineParams,
    GroupedFeatures,
    GroupNormAffine,
    MaxPool,
    group_norm_affine,
    s_pool,
)
from pointkan.blocks.gfp import KanResidual, ResPBlock, resp_block_forward
from pointkan.blocks.lfp import DepthwiseConv, Lfp, dwconv_neighbors, lfp_forward
from pointkan.blocks.model import CloudBatch, PointKan, model_forward
from pointkan.blocks.sensitivity import flag_count, flag_top_points, sensitivity_scores
from pointkan.blocks.stage import Stage, gather_groups, scatter_groups
from pointkan.config import ModelConfig
from pointkan.errors import InvalidArgumentError, UsageError
from pointkan.geometry import PointCloud, hierarchy_plan
from pointkan.kan.stack import KanStack, stack_widths
from pointkan.nn import BatchNorm, Linear, Sequential
from pointkan.training.gradcheck import grad_check, miniature_config


def test_group_norm_identical_neighbours(rng):
    center = rng.normal(size=(1, 3))
    features = np.repeat(center[:, None, :], 4, axis=1)
    beta = rng.normal(size=6)
    out = group_norm_affine(
        GroupedFeatures(features, center), AffineParams(np.ones(6), beta)
    )
    assert out.shape == (1, 4, 6)
    np.testing.assert_array_equal(out[0, :, :3], np.broadcast_to(beta[:3], (4, 3)))
    np.testing.assert_array_equal(out[0, :, 3:], np.broadcast_to(center, (4, 3)))


def test_group_norm_hand_example():
    gf = GroupedFeatures([[[-1.0], [1.0]]], [[0.0]])
    out = group_norm_affine(gf, AffineParams.identity(1))
    scale = 1 / math.sqrt(1 + EPSILON)
    np.testing.assert_allclose(out[0, :, 0], [-scale, scale], rtol=1e-15)
    assert out[0, :, 1].tolist() == [0.0, 0.0]


def test_group_norm_unit_variance(rng):
    features = rng.normal(0.0, 3.0, size=(2, 5, 7, 4))
    centers = rng.normal(size=(2, 5, 4))
    gn = GroupNormAffine(4)
    out = gn((features, centers))
    dev = features - centers[:, :, None, :]
    var = dev.var(axis=(-2, -1))
    np.testing.assert_allclose(out[..., :4].var(axis=(-2, -1)), var / (var + EPSILON), rtol=1e-6)


def test_group_norm_without_affine_has_no_parameters(rng):
    gn = GroupNormAffine(3, affine=False)
    assert gn.parameter_count() == 0
    x = (rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 3)))
    report = grad_check(gn, x, seed=2)
    assert report.passed, report.failures()


def test_group_norm_unused_affine_half_has_zero_gradient(rng):
    gn = GroupNormAffine(3)
    y, cache = gn.forward((rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 3))))
    _, grads = gn.backward(rng.normal(size=y.shape), cache)
    assert not grads["alpha"][3:].any()
    assert not grads["beta"][3:].any()


def test_group_norm_gradients(rng):
    gn = GroupNormAffine(3)
    gn.params["alpha"] = rng.normal(1.0, 0.3, size=6)
    gn.params["beta"] = rng.normal(0.0, 0.3, size=6)
    x = (rng.normal(size=(2, 3, 5, 3)), rng.normal(size=(2, 3, 3)))
    report = grad_check(gn, x, seed=9)
    assert report.passed, report.failures()
    assert {b.name for b in report.blocks} == {"alpha", "beta", "input0", "input1"}


def test_group_norm_shape_errors(rng):
    with pytest.raises(InvalidArgumentError):
        GroupedFeatures(np.zeros((2, 4, 3)), np.zeros((3, 3)))
    with pytest.raises(InvalidArgumentError):
        group_norm_affine(
            GroupedFeatures(np.zeros((1, 4, 3)), np.zeros((1, 3))), AffineParams.identity(2)
        )
    with pytest.raises(InvalidArgumentError):
        GroupNormAffine(3)((rng.normal(size=(1, 4, 2)), rng.normal(size=(1, 2))))
    with pytest.raises(InvalidArgumentError):
        AffineParams(np.ones(4), np.zeros(3))


def test_s_pool_examples(rng):
    np.testing.assert_allclose(s_pool(np.full((5, 2), 0.7)), [0.7, 0.7], rtol=1e-14)
    row = rng.normal(size=(1, 4))
    np.testing.assert_array_equal(s_pool(row), row[0])
    np.testing.assert_allclose(s_pool([[0.0], [math.log(3)]]), [0.75 * math.log(3)], rtol=1e-14)


def test_s_pool_neighbour_order_invariant(rng):
    x = rng.normal(size=(3, 6, 5))
    perm = rng.permutation(6)
    np.testing.assert_allclose(s_pool(x[:, perm]), s_pool(x), atol=1e-9)


def test_max_pool_backward_routes_to_argmax():
    pool = MaxPool()
    x = np.array([[[1.0, 5.0], [3.0, 2.0], [3.0, 0.0]]])
    y, cache = pool.forward(x)
    assert y.tolist() == [[3.0, 5.0]]
    dx, _ = pool.backward(np.array([[10.0, 20.0]]), cache)
    assert dx.tolist() == [[[0.0, 20.0], [10.0, 0.0], [0.0, 0.0]]]


def test_dwconv_examples(rng):
    x = rng.normal(size=(2, 5, 3))
    delta = np.tile([0.0, 1.0, 0.0], (3, 1))
    np.testing.assert_array_equal(dwconv_neighbors(x, delta, np.zeros(3)), x)

    bias = np.array([0.5, -1.0, 2.0])
    out = dwconv_neighbors(x, np.zeros((3, 3)), bias)
    np.testing.assert_array_equal(out, np.broadcast_to(bias, x.shape))

    out = dwconv_neighbors([[1.0], [2.0], [3.0]], [[1.0, 1.0, 1.0]], [0.0])
    assert out.tolist() == [[3.0], [6.0], [5.0]]


def test_dwconv_even_kernel():
    with pytest.raises(InvalidArgumentError, match="odd"):
        dwconv_neighbors(np.zeros((3, 1)), np.ones((1, 2)), np.zeros(1))


def test_dwconv_k_shorter_than_kernel(rng):
    conv = DepthwiseConv(2, 5, rng)
    conv.params["bias"] = rng.normal(size=2)
    report = grad_check(conv, rng.normal(size=(3, 2, 2)), seed=4)
    assert report.passed, report.failures()


def make_lfp(rng, c=4, backend="bspline"):
    kan = KanStack(stack_widths(c, 3, 0.5), rng, backend, groups=2)
    return Lfp(kan, DepthwiseConv(c, 3, rng))


def test_lfp_zero_conv_is_identity():
    for trial in range(100):
        rng = np.random.default_rng(trial)
        lfp = make_lfp(rng)
        lfp.modules["dwconv"].params["kernels"][...] = 0.0
        x = rng.uniform(-2, 2, size=(2, 3, 4))
        np.testing.assert_array_equal(lfp(x), x)


def test_lfp_matches_step_by_step(rng):
    kan = KanStack(stack_widths(4, 3, 0.5), rng, "bspline")
    # Running statistics make the hidden normalisation act row by row
    kan.reset_running_stats()
    kan.eval()
    conv = DepthwiseConv(4, 3, rng)
    conv.params["bias"] = rng.normal(size=4)
    x = rng.uniform(-1, 1, size=(2, 3, 4))

    pointwise = np.stack([np.stack([kan(f[None])[0] for f in grp]) for grp in x])
    expect = x + dwconv_neighbors(pointwise, conv.params["kernels"], conv.params["bias"])
    np.testing.assert_allclose(lfp_forward(x, kan, conv), expect, rtol=1e-12, atol=1e-12)


def test_lfp_without_conv_adds_kan_output(rng):
    kan = KanStack([4, 2, 4], rng, "mlp")
    x = rng.normal(size=(3, 4))
    np.testing.assert_allclose(Lfp(kan)(x), x + kan(x), rtol=1e-15)


def test_lfp_channel_errors(rng):
    with pytest.raises(InvalidArgumentError):
        Lfp(KanStack([4, 2], rng, "mlp"))
    with pytest.raises(InvalidArgumentError):
        Lfp(KanStack([4, 2, 4], rng, "mlp"), DepthwiseConv(3, 3, rng))
    with pytest.raises(InvalidArgumentError):
        make_lfp(rng)(np.zeros((2, 3, 5)))


@pytest.mark.parametrize("backend", ["bspline", "rational", "mlp"])
def test_lfp_gradients(rng, backend):
    lfp = make_lfp(rng, 8, backend)
    lfp.modules["dwconv"].params["bias"] = rng.normal(size=8)
    report = grad_check(lfp, rng.uniform(-1, 1, size=(2, 3, 4, 8)), seed=6)
    assert report.passed, report.failures()


def test_resp_zero_branch_is_identity(rng):
    block = ResPBlock(5, rng)
    block.modules["fc2"].params["weight"][...] = 0.0
    x = rng.normal(size=(8, 5))
    np.testing.assert_array_equal(resp_block_forward(x, block), x)


def test_resp_eval_identity_weights(rng):
    block = ResPBlock(4, rng)
    for name in ("fc1", "fc2"):
        block.modules[name].params["weight"] = np.eye(4)
    block.modules["bn"].reset_running_stats()
    block.eval()
    x = rng.uniform(0, 2, size=(3, 4))
    np.testing.assert_allclose(block(x), 2 * x, rtol=1e-5)


def test_resp_matches_step_by_step(rng):
    block = ResPBlock(6, rng)
    fc1, bn, fc2 = (block.modules[n].params for n in ("fc1", "bn", "fc2"))
    fc1["bias"] = rng.normal(size=6)
    fc2["bias"] = rng.normal(size=6)
    bn["gamma"] = rng.normal(1.0, 0.2, size=6)
    bn["beta"] = rng.normal(size=6)
    x = rng.normal(size=(8, 6))

    h = x @ fc1["weight"] + fc1["bias"]
    mean = h.mean(axis=0)
    var = ((h - mean) ** 2).mean(axis=0)
    h = bn["gamma"] * (h - mean) / np.sqrt(var + 1e-5) + bn["beta"]
    h = np.maximum(h, 0.0)
    expect = x + h @ fc2["weight"] + fc2["bias"]
    np.testing.assert_allclose(resp_block_forward(x, block), expect, rtol=1e-12, atol=1e-12)


def test_resp_eval_needs_statistics(rng):
    block = ResPBlock(3, rng).eval()
    with pytest.raises(UsageError, match="running statistics"):
        block(rng.normal(size=(2, 3)))


def test_batch_norm_running_statistics(rng):
    bn = BatchNorm(2, momentum=0.5)
    assert bn.buffers["running_mean"] is None
    x = rng.normal(3.0, 2.0, size=(10, 2))
    bn(x)
    np.testing.assert_allclose(bn.buffers["running_mean"], 0.5 * x.mean(axis=0))
    np.testing.assert_allclose(bn.buffers["running_var"], 0.5 + 0.5 * x.var(axis=0, ddof=1))


def test_resp_gradients_in_training_mode(rng):
    block = ResPBlock(4, rng)
    report = grad_check(block, rng.normal(size=(8, 4)), seed=1, freeze_statistics=False)
    assert report.passed, report.failures()


def test_kan_residual(rng):
    kan = KanStack([4, 2, 4], rng, "rational", groups=2)
    block = KanResidual(kan)
    x = rng.normal(size=(3, 4))
    np.testing.assert_allclose(block(x), x + kan(x), rtol=1e-15)
    assert [n for n, _ in block.named_parameters()][0].startswith("kan.layer0.")
    with pytest.raises(InvalidArgumentError):
        KanResidual(KanStack([4, 2], rng, "mlp"))


def test_sequential_names_gradients(rng):
    seq = Sequential(("a", Linear(3, 2, rng)), ("b", Linear(2, 2, rng)))
    y, cache = seq.forward(rng.normal(size=(4, 3)))
    _, grads = seq.backward(np.ones_like(y), cache)
    assert sorted(grads) == ["a.bias", "a.weight", "b.bias", "b.weight"]


def test_gather_scatter_adjoint(rng):
    features = rng.normal(size=(2, 10, 3))
    centers = rng.integers(0, 10, size=(2, 4))
    neighbors = rng.integers(0, 10, size=(2, 4, 5))
    nbr, ctr = gather_groups(features, centers, neighbors)
    d_nbr = rng.normal(size=nbr.shape)
    d_ctr = rng.normal(size=ctr.shape)
    dx = scatter_groups(features.shape, centers, neighbors, d_nbr, d_ctr)
    lhs = np.sum(nbr * d_nbr) + np.sum(ctr * d_ctr)
    assert np.sum(features * dx) == pytest.approx(lhs, rel=1e-12)


def stage_inputs(rng, cfg, batch=2):
    clouds = [PointCloud(rng.uniform(-1, 1, size=(cfg.num_points, 3))) for _ in range(batch)]
    cb = CloudBatch.from_clouds(clouds, cfg)
    features = rng.normal(size=(batch, cfg.num_points, cfg.embed_dim))
    return (features, *cb.stage_indices(0))


def test_stage_output_shape(rng):
    cfg = miniature_config()
    stage = Stage(cfg.stages[0], cfg, rng)
    y = stage(stage_inputs(rng, cfg))
    assert y.shape == (2, 8, 8)


def test_stage_without_lfp_max_pools_group_norm(rng):
    cfg = miniature_config(lfp=False, s_pool=False, gfp=False)
    stage = Stage(cfg.stages[0], cfg, rng)
    features, centers, neighbors = stage_inputs(rng, cfg)
    pooled = stage.modules["gn"](gather_groups(features, centers, neighbors)).max(axis=-2)
    # Training mode batch normalisation over every (cloud, group) row
    rows = pooled.reshape(-1, pooled.shape[-1])
    expect = (pooled - rows.mean(axis=0)) / np.sqrt(rows.var(axis=0) + 1e-5)
    np.testing.assert_allclose(stage((features, centers, neighbors)), expect, atol=1e-12)
    with pytest.raises(InvalidArgumentError, match="disabled"):
        stage.local_features(features, centers, neighbors)


def test_stage_index_shape_errors(rng):
    cfg = miniature_config()
    stage = Stage(cfg.stages[0], cfg, rng)
    features, centers, neighbors = stage_inputs(rng, cfg)
    with pytest.raises(InvalidArgumentError):
        stage((features, centers[:, :4], neighbors))


@pytest.mark.parametrize("backend", ["bspline", "rational", "mlp"])
def test_stage_gradients(rng, backend):
    cfg = miniature_config(backend)
    stage = Stage(cfg.stages[0], cfg, rng)
    report = grad_check(stage, stage_inputs(rng, cfg), seed=8)
    assert report.passed, report.failures()


def test_stage_with_kan_global_blocks(rng):
    cfg = miniature_config("rational", gfp_kind="kan")
    stage = Stage(cfg.stages[0], cfg, rng)
    assert isinstance(stage.modules["gfp0"], KanResidual)
    report = grad_check(stage, stage_inputs(rng, cfg), seed=8)
    assert report.passed, report.failures()


def test_model_scores_shape_and_determinism(rng):
    cfg = miniature_config(num_classes=5)
    cloud = PointCloud(rng.uniform(-1, 1, size=(32, 3)))
    a = model_forward(cloud, cfg, PointKan(cfg, seed=3))
    b = model_forward(cloud, cfg, PointKan(cfg, seed=3))
    assert a.shape == (5,)
    assert a.tobytes() == b.tobytes()


def test_model_forward_checks_config(rng):
    cfg = miniature_config(num_classes=5)
    model = PointKan(cfg)
    cloud = PointCloud(rng.uniform(size=(32, 3)))
    with pytest.raises(InvalidArgumentError, match="classes"):
        model_forward(cloud, miniature_config(num_classes=4), model)
    with pytest.raises(InvalidArgumentError, match="architecture"):
        model_forward(cloud, miniature_config(num_classes=5, dwconv=False), model)


@pytest.mark.parametrize("backend", ["bspline", "rational"])
def test_model_permutation_invariance(backend):
    cfg = ModelConfig.toy(256, 4, backend)
    model = PointKan(cfg, seed=1)
    for trial in range(20):
        rng = np.random.default_rng(trial)
        cloud = PointCloud(rng.uniform(-1, 1, size=(256, 3)))
        perm = rng.permutation(256)
        a = model.scores([cloud])
        b = model.scores([cloud.permuted(perm)])
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-6)


def test_model_gradients(rng):
    cfg = miniature_config("bspline")
    model = PointKan(cfg, seed=2)
    clouds = [PointCloud(rng.uniform(-1, 1, size=(32, 3))) for _ in range(2)]
    report = grad_check(model, CloudBatch.from_clouds(clouds, cfg), seed=2)
    assert report.passed, report.failures()
    names = {b.name for b in report.blocks}
    assert "stage1.lfp.dwconv.kernels" in names
    assert "head.fc2.weight" in names


def test_cloud_batch_errors(rng):
    cfg = miniature_config()
    with pytest.raises(InvalidArgumentError):
        CloudBatch.from_clouds([], cfg)
    mixed = [PointCloud(rng.uniform(size=(32, 3))), PointCloud(rng.uniform(size=(33, 3)))]
    with pytest.raises(InvalidArgumentError, match="same number of points"):
        CloudBatch.from_clouds(mixed, cfg)


def test_ablation_parameter_differences():
    cfg = ModelConfig.toy(64, 3)
    full = PointKan(cfg).parameter_count()
    # alpha and beta of length 2d per stage
    no_affine = PointKan(cfg.with_toggles(gam_affine=False)).parameter_count()
    assert full - no_affine == sum(4 * s.width for s in cfg.stages)
    # one kernel of width w and a bias per channel
    no_dwconv = PointKan(cfg.with_toggles(dwconv=False)).parameter_count()
    assert full - no_dwconv == sum(s.out_width * (s.dwconv_kernel + 1) for s in cfg.stages)
    # two C×C linear layers with biases and the batch norm scale and shift
    no_gfp = PointKan(cfg.with_toggles(gfp=False)).parameter_count()
    assert full - no_gfp == sum(
        2 * (s.out_width**2 + s.out_width) + 2 * s.out_width for s in cfg.stages
    )
    assert PointKan(cfg.with_toggles(s_pool=False)).parameter_count() == full


def test_rational_backend_is_smaller():
    cfg = ModelConfig.toy(256, 3)
    bspline = PointKan(cfg).parameter_count()
    rational = PointKan(cfg.with_backend("rational")).parameter_count()
    assert rational < bspline


def test_sensitivity_scores(rng):
    cfg = ModelConfig.toy(64, 1)
    model = PointKan(cfg, seed=4)
    cloud = PointCloud(rng.uniform(-1, 1, size=(64, 3)))
    scores = sensitivity_scores(cloud, model)
    assert scores.shape == (64,)
    assert np.all(scores >= 0)

    stage = cfg.stages[0]
    grouping = hierarchy_plan(cloud.points, [(stage.centers, stage.neighbors)])[0].grouping
    used = np.zeros(64, dtype=bool)
    used[grouping.neighbor_indices.ravel()] = True
    assert np.all(scores[~used] == 0)
    assert np.all(scores[used] > 0)


def test_sensitivity_mlp_backend(rng):
    cfg = ModelConfig.toy(64, 1, "mlp")
    model = PointKan(cfg)
    scores = sensitivity_scores(PointCloud(rng.uniform(size=(64, 3))), model)
    assert np.all(scores >= 0)
    assert all(buf is None for _, buf in model.named_buffers())
    assert model.training


def test_flag_top_points():
    for n in (1, 7, 64, 1024):
        flags = flag_top_points(np.arange(n, dtype=float), 80)
        assert flags.sum() == math.ceil(0.2 * n)
        assert flags[-1]
    # Ties rank by index
    assert flag_top_points([1.0, 1.0, 1.0, 0.0, 1.0], 60).tolist() == [
        True,
        True,
        False,
        False,
        False,
    ]
    assert flag_count(10, 100) == 0
    assert flag_count(10, 0) == 10
    with pytest.raises(InvalidArgumentError):
        flag_count(10, 101)
