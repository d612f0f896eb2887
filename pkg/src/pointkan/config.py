"""
Architecture hyperparameters and their `key = value` text format.

A config file holds one `key = value` per line; `#` starts a comment and
blank lines are ignored. Top-level keys are `ModelConfig` fields, stage keys
are written `stageN.field` with N counting from 1, and `stages` gives the
number of stages. Keys which are not given keep their defaults; unknown keys
are errors.
"""

import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

from pointkan.errors import ConfigError
from pointkan.kan.stack import BACKENDS, stack_widths

GFP_KINDS = ("resp", "kan")


@dataclass(frozen=True)
class StageConfig:
    centers: int
    neighbors: int
    # Input feature width d; the stage outputs 2d
    width: int
    backend: str = "bspline"
    kan_depth: int = 3
    kan_hidden_ratio: float = 0.5
    dwconv_kernel: int = 3
    gfp_blocks: int = 1

    def __post_init__(self):
        for name in ("centers", "neighbors", "width", "kan_depth", "dwconv_kernel"):
            if (val := getattr(self, name)) < 1:
                msg = f"Stage {name} must be positive, not {val}"
                raise ConfigError(msg)
        if self.gfp_blocks < 0:
            msg = f"Stage gfp_blocks must not be negative, not {self.gfp_blocks}"
            raise ConfigError(msg)
        if self.backend not in BACKENDS:
            msg = f"Unknown backend {self.backend!r}, expecting one of {BACKENDS}"
            raise ConfigError(msg)
        if self.dwconv_kernel % 2 == 0:
            msg = f"Depthwise kernel width must be odd, not {self.dwconv_kernel}"
            raise ConfigError(msg)
        if not 0 < self.kan_hidden_ratio:
            msg = f"kan_hidden_ratio must be positive, not {self.kan_hidden_ratio}"
            raise ConfigError(msg)

    @property
    def out_width(self) -> int:
        return 2 * self.width

    def kan_widths(self) -> list[int]:
        return stack_widths(self.out_width, self.kan_depth, self.kan_hidden_ratio)


@dataclass(frozen=True)
class ModelConfig:
    num_points: int
    num_classes: int
    stages: tuple[StageConfig, ...]
    embed_dim: int = 32
    head_hidden: int = 256
    grid_size: int = 5
    spline_order: int = 3
    rational_groups: int = 4
    degree_num: int = 5
    degree_den: int = 4
    gfp_kind: str = "resp"
    # Ablation toggles
    gam_affine: bool = True
    s_pool: bool = True
    lfp: bool = True
    gfp: bool = True
    dwconv: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        for name in ("num_points", "num_classes", "embed_dim", "head_hidden"):
            if (val := getattr(self, name)) < 1:
                msg = f"{name} must be positive, not {val}"
                raise ConfigError(msg)
        if not self.stages:
            msg = "A model needs at least one stage"
            raise ConfigError(msg)
        if self.gfp_kind not in GFP_KINDS:
            msg = f"Unknown gfp_kind {self.gfp_kind!r}, expecting one of {GFP_KINDS}"
            raise ConfigError(msg)

        available = self.num_points
        width = self.embed_dim
        for i, stg in enumerate(self.stages, start=1):
            if stg.centers > available:
                msg = (
                    f"stage{i} samples {stg.centers} centers but only"
                    f" {available} points reach it"
                )
                raise ConfigError(msg)
            if stg.neighbors > available:
                msg = (
                    f"stage{i} groups {stg.neighbors} neighbours but only"
                    f" {available} points reach it"
                )
                raise ConfigError(msg)
            if i > 1 and stg.centers >= available:
                msg = f"stage{i} centers must be fewer than stage{i - 1}'s {available}"
                raise ConfigError(msg)
            if stg.width != width:
                msg = f"stage{i}.width should be {width}, not {stg.width}"
                raise ConfigError(msg)
            self._check_groups(i, stg)
            available = stg.centers
            width = stg.out_width

    def _check_groups(self, i, stg):
        if stg.backend != "rational":
            return
        # Input widths of every rational layer in the stage's stacks
        for w in stg.kan_widths()[:-1]:
            if w % self.rational_groups:
                msg = (
                    f"stage{i}: rational_groups {self.rational_groups} does not"
                    f" divide layer width {w}"
                )
                raise ConfigError(msg)

    @property
    def out_width(self) -> int:
        return self.stages[-1].out_width

    @property
    def backend(self) -> str:
        return self.stages[0].backend

    def stage_plan(self) -> list[tuple[int, int]]:
        return [(s.centers, s.neighbors) for s in self.stages]

    def with_backend(self, backend: str) -> "ModelConfig":
        stages = [dataclasses.replace(s, backend=backend) for s in self.stages]
        return dataclasses.replace(self, stages=stages)

    def with_toggles(self, **toggles) -> "ModelConfig":
        return dataclasses.replace(self, **toggles)

    @classmethod
    def build(
        cls,
        num_points: int,
        num_classes: int,
        centers,
        neighbors,
        embed_dim=32,
        backend="bspline",
        **kwargs,
    ) -> "ModelConfig":
        if isinstance(neighbors, int):
            neighbors = [neighbors] * len(centers)
        stages = []
        width = embed_dim
        for g, k in zip(centers, neighbors, strict=True):
            stages.append(StageConfig(g, k, width, backend))
            width *= 2
        return cls(num_points, num_classes, stages, embed_dim=embed_dim, **kwargs)

    @classmethod
    def default(cls, num_classes: int, backend="bspline") -> "ModelConfig":
        """Four stages for 1024 point clouds, 24 neighbours per group"""
        return cls.build(1024, num_classes, (512, 256, 128, 64), 24, 32, backend)

    @classmethod
    def toy(cls, num_points: int, num_classes: int, backend="bspline") -> "ModelConfig":
        """Narrower four stage model for the desk-scale synthetic datasets"""
        centers = [num_points // 4, num_points // 8, num_points // 16, num_points // 32]
        neighbors = min(12, centers[-2])
        return cls.build(
            num_points,
            num_classes,
            centers,
            neighbors,
            embed_dim=16,
            backend=backend,
            head_hidden=64,
        )

    def to_text(self) -> str:
        lines = []
        for fld in dataclasses.fields(self):
            if fld.name == "stages":
                continue
            lines.append(f"{fld.name} = {_format_value(getattr(self, fld.name))}")
        lines.append(f"stages = {len(self.stages)}")
        for i, stg in enumerate(self.stages, start=1):
            for fld in dataclasses.fields(stg):
                lines.append(f"stage{i}.{fld.name} = {_format_value(getattr(stg, fld.name))}")
        return "\n".join(lines) + "\n"


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    return repr(val) if isinstance(val, float) else str(val)


def _parse_value(text: str, typ, key: str, where: str):
    try:
        if typ is bool:
            match text.lower():
                case "true" | "yes" | "on" | "1":
                    return True
                case "false" | "no" | "off" | "0":
                    return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        return text
    except ValueError:
        msg = f"{where}: bad {typ.__name__} value {text!r} for {key!r}"
        raise ConfigError(msg) from None


MODEL_FIELDS = {
    f.name: f.type
    for f in dataclasses.fields(ModelConfig)
    if f.name != "stages"
}
STAGE_FIELDS = {f.name: f.type for f in dataclasses.fields(StageConfig)}


def parse_config_text(text: str, source="config", base: ModelConfig | None = None):
    """
    Parses `key = value` config text into a `ModelConfig`. Values missing
    from the text are taken from `base`, or from the defaults for
    `num_points` points when `base` is not given.
    """
    top = {}
    per_stage = {}
    seen = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}: line {number}"
        if "=" not in line:
            msg = f"{where}: expecting 'key = value', got {raw.strip()!r}"
            raise ConfigError(msg)
        key, value = (x.strip() for x in line.split("=", 1))
        if key in seen:
            msg = f"{where}: duplicate key {key!r}"
            raise ConfigError(msg)
        seen.add(key)

        if m := re.fullmatch(r"stage(\d+)\.(\w+)", key):
            idx, name = int(m.group(1)), m.group(2)
            if idx < 1 or name not in STAGE_FIELDS:
                msg = f"{where}: unknown key {key!r}"
                raise ConfigError(msg)
            per_stage.setdefault(idx, {})[name] = _parse_value(
                value, STAGE_FIELDS[name], key, where
            )
        elif key == "stages":
            top["stages"] = _parse_value(value, int, key, where)
        elif key in MODEL_FIELDS:
            top[key] = _parse_value(value, MODEL_FIELDS[key], key, where)
        else:
            msg = f"{where}: unknown key {key!r}"
            raise ConfigError(msg)

    return _assemble(top, per_stage, base, source)


def _assemble(top, per_stage, base, source):
    if base is None:
        num_classes = top.get("num_classes", 40)
        num_points = top.get("num_points", 1024)
        if num_points == 1024:
            base = ModelConfig.default(num_classes)
        else:
            base = ModelConfig.toy(num_points, num_classes)
    n_stages = top.pop("stages", max([len(base.stages), *per_stage]))
    if extra := [i for i in per_stage if i > n_stages]:
        msg = f"{source}: stage{extra[0]} given but stages = {n_stages}"
        raise ConfigError(msg)

    embed_dim = top.get("embed_dim", base.embed_dim)
    stages = []
    width = embed_dim
    for i in range(1, n_stages + 1):
        have = per_stage.get(i, {})
        if i <= len(base.stages):
            template = dataclasses.asdict(base.stages[i - 1])
        elif "centers" in have and "neighbors" in have:
            template = {}
        else:
            msg = f"{source}: stage{i} needs stage{i}.centers and stage{i}.neighbors"
            raise ConfigError(msg)
        template["width"] = width
        template.update(have)
        stages.append(StageConfig(**template))
        width = stages[-1].out_width

    values = {
        name: top.get(name, getattr(base, name)) for name in MODEL_FIELDS
    }
    return ModelConfig(stages=stages, **values)


def load_config(path: Path, base: ModelConfig | None = None) -> ModelConfig:
    return parse_config_text(path.read_text(), str(path), base)
