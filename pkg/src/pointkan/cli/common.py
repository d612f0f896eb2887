import logging
import sys
from pathlib import Path

import click

from pointkan.config import ModelConfig, load_config
from pointkan.errors import ConfigError, InvalidInputError
from pointkan.geometry import PointCloud
from pointkan.manifest import DatasetManifest, load_manifest
from pointkan.ndjson import ndjson_row
from pointkan.pretty import table

log = logging.getLogger(__name__)


def default_config(num_points: int, num_classes: int) -> ModelConfig:
    if num_points == ModelConfig.default(num_classes).num_points:
        return ModelConfig.default(num_classes)
    return ModelConfig.toy(num_points, num_classes)


def resolve_config(
    config_file: Path | None,
    num_points: int,
    num_classes: int,
    backend: str | None = None,
    toggles: dict | None = None,
) -> ModelConfig:
    """
    The model config for a dataset: the config file if given, with the
    command line backend and ablation flags applied on top.
    """
    cfg = default_config(num_points, num_classes)
    if config_file:
        cfg = load_config(config_file, base=cfg)
        if cfg.num_classes != num_classes:
            msg = (
                f"{config_file}: num_classes = {cfg.num_classes} but the data"
                f" has {num_classes} classes"
            )
            raise ConfigError(msg)
    if backend:
        cfg = cfg.with_backend(backend)
    if toggles:
        cfg = cfg.with_toggles(**toggles)
    log.debug(f"Model config:\n{cfg.to_text()}")
    return cfg


def load_dataset(path: Path) -> tuple[DatasetManifest, list[PointCloud]]:
    """Loads and normalises every cloud of a manifest, which must all be one size"""
    manifest = load_manifest(path)
    clouds = manifest.load_clouds()
    if not clouds:
        msg = f"{path}: manifest lists no clouds"
        raise InvalidInputError(msg)
    if len(sizes := {len(c) for c in clouds}) > 1:
        msg = f"{path}: clouds must all have the same number of points, found {sorted(sizes)}"
        raise InvalidInputError(msg)
    return manifest, clouds


def use_ndjson(output_format: str | None) -> bool:
    if output_format:
        return output_format.upper() == "NDJSON"
    return not sys.stdout.isatty()


def emit_rows(headers: list[str], rows: list[dict], output_format: str | None) -> None:
    if use_ndjson(output_format):
        for row in rows:
            click.echo(ndjson_row(row), nl=False)
    else:
        click.echo(table(headers, rows), nl=False)
