import logging
import sys

import click

from pointkan import click_options
from pointkan.cli.bench import bench
from pointkan.cli.evaluate import eval_cmd
from pointkan.cli.fewshot import fewshot
from pointkan.cli.gradcheck import gradcheck
from pointkan.cli.robustness import robustness
from pointkan.cli.sensitivity import sensitivity
from pointkan.cli.synth import synth
from pointkan.cli.train import train_cmd
from pointkan.errors import PointKanError


def cli():
    try:
        pointkan_main()
    except PointKanError as err:
        sys.exit(f"{err.__class__.__name__}: {err}")


@click.group
@click_options.log_level
def pointkan_main(log_level):
    """Point cloud classification with Kolmogorov-Arnold network layers"""
    logging.basicConfig(level=getattr(logging, log_level.upper()))


pointkan_main.add_command(bench)
pointkan_main.add_command(eval_cmd, name="eval")
pointkan_main.add_command(fewshot)
pointkan_main.add_command(gradcheck)
pointkan_main.add_command(robustness)
pointkan_main.add_command(sensitivity)
pointkan_main.add_command(synth)
pointkan_main.add_command(train_cmd, name="train")
