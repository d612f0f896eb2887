import pathlib

import click

from pointkan.kan.stack import BACKENDS
from pointkan.training.optim import OPTIMIZERS

log_level = click.option(
    "--log-level",
    type=click.Choice(
        ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        case_sensitive=False,
    ),
    default="WARNING",
    hidden=True,
    help="Diagnostic messages to show.",
)

seed = click.option(
    "--seed",
    type=int,
    default=0,
    show_default=True,
    help="Seed for every random choice the command makes.",
)

config = click.option(
    "--config",
    "config_file",
    type=click.Path(path_type=pathlib.Path, exists=True, dir_okay=False, readable=True),
    help="""
      Model config file of `key = value` lines. Without one the default
      four stage model is used for 1024 point clouds, and a narrower model
      sized for the data otherwise.
    """,
)

data = click.option(
    "--data",
    type=click.Path(path_type=pathlib.Path, exists=True, dir_okay=False, readable=True),
    required=True,
    help="Dataset manifest file.",
)

test_data = click.option(
    "--test-data",
    type=click.Path(path_type=pathlib.Path, exists=True, dir_okay=False, readable=True),
    help="Manifest of the test set, reported after every epoch.",
)

checkpoint = click.option(
    "--checkpoint",
    "checkpoint_file",
    type=click.Path(path_type=pathlib.Path, exists=True, dir_okay=False, readable=True),
    required=True,
    help="Checkpoint file written by `pointkan train`.",
)

out = click.option(
    "--out",
    type=click.Path(path_type=pathlib.Path),
    required=True,
    help="Output file or directory.",
)

epochs = click.option(
    "--epochs",
    type=click.IntRange(min=0),
    default=30,
    show_default=True,
    help="Number of passes over the training set.",
)

backend = click.option(
    "--backend",
    type=click.Choice(BACKENDS),
    help="""
      Layers used for local feature processing. Overrides the config file,
      which defaults to bspline.
    """,
)

optimizer = click.option(
    "--optimizer",
    type=click.Choice(OPTIMIZERS),
    default="sgd_momentum",
    show_default=True,
    help="Optimizer, with cosine learning rate decay over the epochs.",
)

lr = click.option(
    "--lr",
    type=click.FloatRange(min=0),
    help="Starting learning rate. Defaults to 0.01 for SGD and 5e-4 for Adam.",
)

tol = click.option(
    "--tol",
    type=click.FloatRange(min=0, min_open=True),
    default=1e-5,
    show_default=True,
    help="Largest relative error accepted.",
)

way = click.option(
    "--way",
    type=click.IntRange(min=1),
    default=5,
    show_default=True,
    help="Number of classes sampled per episode.",
)

shot = click.option(
    "--shot",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
    help="Training clouds per class in each episode.",
)

trials = click.option(
    "--trials",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
    help="Number of independent episodes.",
)

percentile = click.option(
    "--percentile",
    type=click.FloatRange(0, 100),
    default=80.0,
    show_default=True,
    help="Points scoring above this percentile are flagged.",
)

output_format = click.option(
    "--format",
    "output_format",
    type=click.Choice(["TXT", "NDJSON"], case_sensitive=False),
    default=None,
    help="""
      Output as a text table or as ND-JSON. The default is text when STDOUT
      is a terminal and ND-JSON otherwise.
    """,
)


def ablation_toggles(func):
    """
    Adds the `--no-affine`, `--no-spool`, `--no-lfp`, `--no-gfp` and
    `--no-dwconv` flags, collected into a `toggles` dict of the `ModelConfig`
    fields switched off.
    """
    flags = [
        ("--no-affine", "gam_affine", "learnable affine transform after Group-Norm"),
        ("--no-spool", "s_pool", "softmax pooling branch"),
        ("--no-lfp", "lfp", "local feature processing"),
        ("--no-gfp", "gfp", "global feature processing"),
        ("--no-dwconv", "dwconv", "depthwise convolution inside local processing"),
    ]
    for flag, field_name, desc in reversed(flags):
        func = click.option(
            flag,
            f"no_{field_name}",
            is_flag=True,
            default=False,
            help=f"Disable the {desc}.",
        )(func)
    return func


def toggles_from_kwargs(kwargs: dict) -> dict[str, bool]:
    """Pops the `no_<field>` flags from `kwargs`, returning fields to disable"""
    toggles = {}
    for field_name in ("gam_affine", "s_pool", "lfp", "gfp", "dwconv"):
        if kwargs.pop(f"no_{field_name}", False):
            toggles[field_name] = False
    return toggles
