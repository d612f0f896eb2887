import sys
import time

import click

from pointkan import click_options
from pointkan.cli.common import emit_rows, use_ndjson
from pointkan.pretty import pass_fail, s
from pointkan.training.gradcheck import SUITE, gradcheck_suite


@click.command()
@click_options.seed
@click_options.tol
@click.option(
    "--cases",
    type=click.IntRange(min=1),
    default=13,
    show_default=True,
    help="Random configurations checked for every kind of block.",
)
@click.option(
    "--kind",
    "kinds",
    type=click.Choice(list(SUITE)),
    multiple=True,
    help="Kind of block to check. Can be given more than once; defaults to all.",
)
@click_options.output_format
def gradcheck(seed, tol, cases, kinds, output_format):
    """
    Checks the analytic gradients of every block against central finite
    differences over seeded random configurations. Exits with an error if
    any relative error reaches --tol.
    """
    start = time.perf_counter()
    rows = []
    failed = 0
    for kind, report in gradcheck_suite(seed, cases, tol, kinds):
        failed += not report.passed
        rows.append(
            {
                "kind": kind,
                "config": report.label,
                "blocks": len(report.blocks),
                "max_error": report.max_error,
                "passed": report.passed,
            }
        )
    headers = ["kind", "config", "blocks", "max_error", "passed"]
    if use_ndjson(output_format):
        emit_rows(headers, rows, output_format)
    else:
        for row in rows:
            row["passed"] = pass_fail(row["passed"])
        emit_rows(headers, rows, output_format)
        elapsed = time.perf_counter() - start
        click.echo(
            f"{len(rows)} configuration{s(rows)} checked in {elapsed:.1f}s,"
            f" tolerance {tol:g}"
        )
    if failed:
        sys.exit(f"Gradient check failed for {failed} configuration{s(failed)}")
