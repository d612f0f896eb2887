from pathlib import Path

import click
import numpy as np

from pointkan import click_options
from pointkan.blocks.model import PointKan
from pointkan.blocks.sensitivity import flag_top_points, sensitivity_scores
from pointkan.checkpoint import load_checkpoint
from pointkan.cli.common import default_config
from pointkan.config import load_config
from pointkan.geometry import PointCloud, centroid_normalize
from pointkan.points_file import atomic_write, format_points, load_points_file
from pointkan.synth import SHAPES, sample_shape


@click.command()
@click.option(
    "--points",
    "points_file",
    type=click.Path(path_type=Path, exists=True, dir_okay=False, readable=True),
    help="Points file to score.",
)
@click.option(
    "--shape",
    type=click.Choice(SHAPES),
    default="cube",
    show_default=True,
    help="Synthetic shape to score when no --points file is given.",
)
@click.option(
    "--num-points",
    type=click.IntRange(min=32),
    default=1024,
    show_default=True,
    help="Size of the synthetic cloud.",
)
@click.option(
    "--checkpoint",
    "checkpoint_file",
    type=click.Path(path_type=Path, exists=True, dir_okay=False, readable=True),
    help="Trained model to use. A seeded random model is built without one.",
)
@click_options.config
@click_options.backend
@click_options.percentile
@click_options.out
@click_options.seed
def sensitivity(
    points_file,
    shape,
    num_points,
    checkpoint_file,
    config_file,
    backend,
    percentile,
    out,
    seed,
):
    """
    Scores every point by the summed L2 norm of the first stage local
    features at each place it occurs as a neighbour, and writes

    \b
      x y z score flag

    per point to --out, where flag is 1 for the points scoring above
    --percentile.
    """
    if points_file:
        cloud = load_points_file(points_file)
    else:
        rng = np.random.default_rng(seed)
        cloud = PointCloud(sample_shape(shape, num_points, 0.0, rng))

    if checkpoint_file:
        model = load_checkpoint(checkpoint_file)
        if backend and backend != model.config.backend:
            msg = f"--backend {backend} differs from the checkpoint's {model.config.backend}"
            raise click.UsageError(msg)
    else:
        cfg = default_config(len(cloud), 1)
        if config_file:
            cfg = load_config(config_file, base=cfg)
        if backend:
            cfg = cfg.with_backend(backend)
        model = PointKan(cfg, seed=seed)

    scores = sensitivity_scores(centroid_normalize(cloud), model)
    flags = flag_top_points(scores, percentile)
    score_txt = [f"{x:.17g}" for x in scores]
    atomic_write(out, format_points(cloud.points, (score_txt, flags.astype(int))))
    click.echo(
        f"Flagged {int(flags.sum())} of {len(cloud)} points above the"
        f" {percentile:g}th percentile ({model.config.backend} backend)"
    )
