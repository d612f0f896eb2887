import click

from pointkan import click_options
from pointkan.checkpoint import load_checkpoint
from pointkan.cli.common import emit_rows, load_dataset
from pointkan.errors import InvalidInputError
from pointkan.training.loop import evaluate


def check_classes(manifest, model):
    if manifest.num_classes != model.num_classes:
        msg = (
            f"Dataset has {manifest.num_classes} classes but the model"
            f" scores {model.num_classes}"
        )
        raise InvalidInputError(msg)


@click.command(name="eval")
@click_options.checkpoint
@click_options.data
@click_options.output_format
def eval_cmd(checkpoint_file, data, output_format):
    """
    Reports overall accuracy (OA), mean per-class accuracy (mAcc) and the
    accuracy of every class present in the --data manifest
    """
    model = load_checkpoint(checkpoint_file)
    manifest, clouds = load_dataset(data)
    check_classes(manifest, model)
    result = evaluate(model, clouds)

    totals = result.confusion.sum(axis=1)
    rows = [
        {
            "class": manifest.class_names[c],
            "count": int(totals[c]),
            "accuracy": acc,
        }
        for c, acc in result.class_accuracies().items()
    ]
    emit_rows(["class", "count", "accuracy"], rows, output_format)
    click.echo(
        f"OA {result.overall_accuracy:.4f} mAcc {result.mean_class_accuracy:.4f}"
        f" over {result.count} clouds"
    )
