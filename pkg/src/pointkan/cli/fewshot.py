import sys

import click

from pointkan import click_options
from pointkan.cli.common import load_dataset, resolve_config
from pointkan.training.fewshot import few_shot_episodes, mean_std, run_few_shot


@click.command()
@click_options.data
@click_options.way
@click_options.shot
@click_options.trials
@click_options.config
@click_options.epochs
@click_options.backend
@click_options.optimizer
@click_options.seed
@click.option(
    "--episodes-only",
    is_flag=True,
    default=False,
    help="Print the composition of every episode without training.",
)
@click_options.ablation_toggles
def fewshot(
    data,
    way,
    shot,
    trials,
    config_file,
    epochs,
    backend,
    optimizer,
    seed,
    episodes_only,
    **flags,
):
    """
    Runs --trials independent n-way m-shot episodes on the --data manifest.
    Each trains a fresh model on exactly way × shot clouds and tests it on
    20 other clouds of each sampled class, then the mean ± standard
    deviation of the test accuracies is printed.
    """
    manifest, clouds = load_dataset(data)
    episodes = few_shot_episodes(manifest.labels, way, shot, trials, seed)
    for i, ep in enumerate(episodes, start=1):
        if set(ep.train) & set(ep.test):
            sys.exit(f"Episode {i} shares clouds between its train and test sets")
        names = ",".join(manifest.class_names[c] for c in ep.classes)
        click.echo(f"episode {i} classes {names} train {len(ep.train)} test {len(ep.test)}")
    if episodes_only:
        return

    toggles = click_options.toggles_from_kwargs(flags)

    def make_config(num_classes):
        return resolve_config(config_file, len(clouds[0]), num_classes, backend, toggles)

    accuracies = run_few_shot(clouds, episodes, make_config, epochs, optimizer, seed)
    for i, acc in enumerate(accuracies, start=1):
        click.echo(f"trial {i} accuracy {acc:.4f}")
    mean, std = mean_std(accuracies)
    click.echo(f"accuracy {mean:.4f} ± {std:.4f} over {len(accuracies)} trials")
