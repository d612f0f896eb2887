from pathlib import Path

import click

from pointkan import click_options
from pointkan.blocks.model import PointKan
from pointkan.checkpoint import save_checkpoint
from pointkan.cli.common import load_dataset, resolve_config
from pointkan.training.loop import train
from pointkan.training.optim import OptimizerState


@click.command(name="train")
@click_options.data
@click_options.test_data
@click_options.out
@click_options.config
@click_options.epochs
@click_options.backend
@click_options.optimizer
@click_options.lr
@click.option(
    "--weight-decay",
    type=click.FloatRange(min=0),
    default=0.0,
    show_default=True,
    help="L2 penalty added to every gradient.",
)
@click.option(
    "--epoch-log",
    type=click.Path(dir_okay=False, path_type=Path),
    help="File to append one line per epoch to.",
)
@click_options.seed
@click_options.ablation_toggles
def train_cmd(
    data,
    test_data,
    out,
    config_file,
    epochs,
    backend,
    optimizer,
    lr,
    weight_decay,
    epoch_log,
    seed,
    **flags,
):
    """
    Trains a classifier from scratch on the --data manifest and saves the
    checkpoint to --out. One line is printed per epoch:

    \b
      epoch <i> loss <f> train_acc <f> test_acc <f>
    """
    manifest, clouds = load_dataset(data)
    test_set = load_dataset(test_data)[1] if test_data else None
    cfg = resolve_config(
        config_file,
        len(clouds[0]),
        manifest.num_classes,
        backend,
        click_options.toggles_from_kwargs(flags),
    )
    model = PointKan(cfg, seed=seed)
    opt = OptimizerState.for_kind(
        optimizer, epochs, lr0=lr, weight_decay=weight_decay
    )
    train(
        model,
        clouds,
        epochs,
        opt,
        seed,
        test_set=test_set,
        epoch_log=epoch_log,
        on_epoch=lambda rec: click.echo(rec.line()),
    )
    save_checkpoint(out, model)
    click.echo(f"Saved {model.parameter_count():_} parameters to {out}")
