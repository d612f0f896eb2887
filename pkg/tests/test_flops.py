import pytest

from pointkan.config import ModelConfig
from pointkan.errors import InvalidArgumentError
from pointkan.flops import CONVENTION, estimate_flops, layer_flops


def test_layer_flops():
    assert layer_flops("mlp", 64, 128) == 16384
    # 8 basis functions per edge at grid 5 and order 3
    assert layer_flops("vanilla_kan", 64, 128) == 64 * 128 * (2 * 8 + 4 * 3 * 8)
    assert layer_flops("efficient_kan", 64, 128) == 64 * (2 * 9 + 6) + 16384
    assert layer_flops("efficient_kan", 64, 128) < layer_flops("vanilla_kan", 64, 128)
    assert layer_flops("vanilla_kan", 4, 4, grid_size=3, order=1) == 16 * (8 + 16)
    with pytest.raises(InvalidArgumentError, match="Unknown layer kind 'conv'"):
        layer_flops("conv", 4, 4)


def test_report_rows():
    cfg = ModelConfig.build(64, 3, [16, 8], 4)
    report = estimate_flops(cfg)
    assert report.convention == CONVENTION
    assert report.get("embed") == 64 * 2 * 3 * 32
    # 16 groups of 4 neighbours at 64 channels, width 3 kernel
    assert report.get("stage1.lfp.dwconv") == 2 * 3 * 16 * 4 * 64
    assert report.get("stage1.max_pool") == 16 * 4 * 64
    assert report.get("stage2.group_norm") == 6 * 8 * 4 * 64
    assert report.get("stage2.norm") == 4 * 8 * 128
    stages = report.stage_total(1) + report.stage_total(2)
    assert report.total == report.get("embed") + stages + report.get("head")


def test_dwconv_flops_scale_with_neighbours():
    small = estimate_flops(ModelConfig.build(64, 3, [16, 8], 4))
    large = estimate_flops(ModelConfig.build(64, 3, [16, 8], 8))
    for i in (1, 2):
        row = f"stage{i}.lfp.dwconv"
        assert large.get(row) == 2 * small.get(row)
        # Normalisation and global processing run once per group, not per neighbour
        per_group = small.get(f"stage{i}.norm") + small.get(f"stage{i}.gfp")
        assert large.stage_total(i) == 2 * small.stage_total(i) - per_group


@pytest.mark.parametrize(
    ("toggle", "row"),
    [
        ("dwconv", "stage1.lfp.dwconv"),
        ("s_pool", "stage1.s_pool"),
        ("gfp", "stage1.gfp"),
        ("lfp", "stage1.lfp.kan"),
    ],
)
def test_ablations_drop_rows(toggle, row):
    cfg = ModelConfig.build(64, 3, [16, 8], 4)
    full = estimate_flops(cfg)
    ablated = estimate_flops(cfg.with_toggles(**{toggle: False}))
    with pytest.raises(KeyError):
        ablated.get(row)
    assert ablated.total < full.total


def test_backends_rank_by_cost():
    cfg = ModelConfig.toy(256, 10)
    totals = {b: estimate_flops(cfg.with_backend(b)).total for b in ("bspline", "rational", "mlp")}
    assert totals["mlp"] < totals["rational"] < totals["bspline"]
