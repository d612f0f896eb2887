import click

from pointkan import click_options
from pointkan.checkpoint import load_checkpoint
from pointkan.cli.common import emit_rows, load_dataset
from pointkan.cli.evaluate import check_classes
from pointkan.geometry import PERTURBATIONS
from pointkan.training.loop import evaluate, robustness_eval


@click.command()
@click_options.checkpoint
@click_options.data
@click.option(
    "--perturbation",
    "perturbations",
    type=click.Choice(list(PERTURBATIONS)),
    multiple=True,
    help="Perturbation to apply. Can be given more than once; defaults to all.",
)
@click_options.seed
@click_options.output_format
def robustness(checkpoint_file, data, perturbations, seed, output_format):
    """
    Accuracy of a trained model on the --data clouds before and after a
    random anisotropic scale and shift, point dropout, or Gaussian noise
    """
    model = load_checkpoint(checkpoint_file)
    manifest, clouds = load_dataset(data)
    check_classes(manifest, model)

    results = [("none", evaluate(model, clouds))]
    for name in perturbations or PERTURBATIONS:
        results.append((name, robustness_eval(model, clouds, name, seed)))
    rows = [
        {
            "perturbation": name,
            "OA": res.overall_accuracy,
            "mAcc": res.mean_class_accuracy,
        }
        for name, res in results
    ]
    emit_rows(["perturbation", "OA", "mAcc"], rows, output_format)
