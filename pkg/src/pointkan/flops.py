"""
Analytic FLOP counts per input cloud.

A multiply-add counts as 2 FLOPs and biases are not counted.
"""

from dataclasses import dataclass, field

from pointkan.config import ModelConfig, StageConfig
from pointkan.errors import InvalidArgumentError
from pointkan.kan.params import LAYER_KINDS

CONVENTION = (
    "multiply-add = 2 FLOPs; linear = 2·d_in·d_out;"
    " B-spline KAN edge = 2·(grid+k) + 4·k·(grid+k);"
    " rational channel = 2·(m+n) + 6, plus the linear mix;"
    " depthwise conv = 2·w per element; group norm = 6, softmax pool = 5,"
    " batch norm = 4, max pool = 1 per element"
)

GROUP_NORM_PER_ELEMENT = 6
SOFT_POOL_PER_ELEMENT = 5
BATCH_NORM_PER_ELEMENT = 4
MAX_POOL_PER_ELEMENT = 1


def bspline_edge_flops(grid_size: int, order: int) -> int:
    basis = grid_size + order
    return 2 * basis + 4 * order * basis


def rational_channel_flops(degree_num: int, degree_den: int) -> int:
    return 2 * (degree_num + degree_den) + 6


def layer_flops(
    kind: str,
    d_in: int,
    d_out: int,
    *,
    grid_size=5,
    order=3,
    degree_num=5,
    degree_den=4,
) -> int:
    """FLOPs to apply one layer to a single input vector"""
    match kind:
        case "mlp":
            return 2 * d_in * d_out
        case "vanilla_kan":
            return d_in * d_out * bspline_edge_flops(grid_size, order)
        case "efficient_kan":
            return d_in * rational_channel_flops(degree_num, degree_den) + 2 * d_in * d_out
    msg = f"Unknown layer kind {kind!r}, expecting one of {LAYER_KINDS}"
    raise InvalidArgumentError(msg)


BACKEND_KIND = {"bspline": "vanilla_kan", "rational": "efficient_kan", "mlp": "mlp"}


def stack_flops(widths: list[int], backend: str, cfg: ModelConfig) -> int:
    kind = BACKEND_KIND[backend]
    hidden_norms = BATCH_NORM_PER_ELEMENT * sum(widths[1:-1])
    return hidden_norms + sum(
        layer_flops(
            kind,
            a,
            b,
            grid_size=cfg.grid_size,
            order=cfg.spline_order,
            degree_num=cfg.degree_num,
            degree_den=cfg.degree_den,
        )
        for a, b in zip(widths, widths[1:], strict=False)
    )


@dataclass
class FlopReport:
    rows: list[tuple[str, int]] = field(default_factory=list)
    convention: str = CONVENTION

    @property
    def total(self) -> int:
        return sum(n for _, n in self.rows)

    def get(self, name: str) -> int:
        return dict(self.rows)[name]

    def stage_total(self, i: int) -> int:
        prefix = f"stage{i}."
        return sum(n for name, n in self.rows if name.startswith(prefix))


def stage_rows(i: int, stage: StageConfig, cfg: ModelConfig) -> list[tuple[str, int]]:
    g, k, d = stage.centers, stage.neighbors, stage.width
    c = stage.out_width
    grouped = g * k * c
    rows = [(f"stage{i}.group_norm", GROUP_NORM_PER_ELEMENT * g * k * d)]
    if cfg.lfp:
        per_neighbor = stack_flops(stage.kan_widths(), stage.backend, cfg)
        rows.append((f"stage{i}.lfp.kan", g * k * per_neighbor))
        if cfg.dwconv:
            rows.append((f"stage{i}.lfp.dwconv", 2 * stage.dwconv_kernel * grouped))
    rows.append((f"stage{i}.max_pool", MAX_POOL_PER_ELEMENT * grouped))
    if cfg.s_pool:
        rows.append((f"stage{i}.s_pool", SOFT_POOL_PER_ELEMENT * grouped))
    rows.append((f"stage{i}.norm", BATCH_NORM_PER_ELEMENT * g * c))
    if cfg.gfp and stage.gfp_blocks:
        if cfg.gfp_kind == "kan":
            per_block = stack_flops(stage.kan_widths(), stage.backend, cfg)
        else:
            per_block = 2 * layer_flops("mlp", c, c) + BATCH_NORM_PER_ELEMENT * c
        rows.append((f"stage{i}.gfp", stage.gfp_blocks * g * per_block))
    return rows


def estimate_flops(cfg: ModelConfig) -> FlopReport:
    report = FlopReport()
    report.rows.append(("embed", cfg.num_points * layer_flops("mlp", 3, cfg.embed_dim)))
    for i, stage in enumerate(cfg.stages, start=1):
        report.rows.extend(stage_rows(i, stage, cfg))
    last = cfg.stages[-1]
    c = cfg.out_width
    head = (
        2 * last.centers * c
        + layer_flops("mlp", 2 * c, cfg.head_hidden)
        + layer_flops("mlp", cfg.head_hidden, cfg.num_classes)
    )
    report.rows.append(("head", head))
    return report
