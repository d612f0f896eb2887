import click

from pointkan import click_options
from pointkan.synth import SHAPES, synth_dataset


@click.command()
@click_options.out
@click.option(
    "--shapes",
    default="sphere,cube,cylinder",
    show_default=True,
    help=f"Comma separated shape names, from: {', '.join(SHAPES)}.",
)
@click.option(
    "--per-class",
    type=click.IntRange(min=1),
    default=100,
    show_default=True,
    help="Training clouds per shape.",
)
@click.option(
    "--test-per-class",
    type=click.IntRange(min=0),
    default=30,
    show_default=True,
    help="Test clouds per shape. No test manifest is written for 0.",
)
@click.option(
    "--points",
    "num_points",
    type=click.IntRange(min=8),
    default=256,
    show_default=True,
    help="Points per cloud.",
)
@click.option(
    "--noise",
    type=click.FloatRange(min=0),
    default=0.02,
    show_default=True,
    help="Standard deviation of the Gaussian jitter.",
)
@click_options.seed
def synth(out, shapes, per_class, test_per_class, num_points, noise, seed):
    """
    Writes a synthetic dataset of points files with `train.manifest` and
    `test.manifest` files under the --out directory
    """
    names = [x.strip() for x in shapes.split(",") if x.strip()]
    train_set, test_set = synth_dataset(
        out, names, per_class, num_points, noise, seed, test_per_class
    )
    click.echo(f"{len(train_set)} training clouds in {out / 'train.manifest'}")
    if test_set:
        click.echo(f"{len(test_set)} test clouds in {out / 'test.manifest'}")
