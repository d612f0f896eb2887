import click

from pointkan import click_options
from pointkan.blocks.model import PointKan
from pointkan.cli.common import default_config, emit_rows, use_ndjson
from pointkan.flops import CONVENTION, estimate_flops, layer_flops
from pointkan.kan.params import param_count
from pointkan.pretty import bold


def int_list(ctx, param, value):
    try:
        vals = [int(x) for x in value.split(",") if x.strip()]
    except ValueError:
        msg = f"expecting comma separated integers, not {value!r}"
        raise click.BadParameter(msg) from None
    if not vals or min(vals) < 1:
        msg = f"expecting positive integers, not {value!r}"
        raise click.BadParameter(msg)
    return vals


@click.command()
@click.option(
    "--dims",
    default="16,64,256",
    show_default=True,
    callback=int_list,
    help="Comma separated layer widths.",
)
@click.option(
    "--pairs",
    is_flag=True,
    default=False,
    help="Emit every (d_in, d_out) pair of --dims instead of d_in = d_out.",
)
@click.option(
    "--groups",
    default="4",
    show_default=True,
    callback=int_list,
    help="Comma separated rational group counts, one efficient_kan row each.",
)
@click.option("--grid-size", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--order", type=click.IntRange(min=0), default=3, show_default=True)
@click.option("--degree-num", type=click.IntRange(min=0), default=5, show_default=True)
@click.option("--degree-den", type=click.IntRange(min=0), default=4, show_default=True)
@click.option(
    "--num-points",
    type=click.IntRange(min=32),
    default=1024,
    show_default=True,
    help="Cloud size of the model compared in the totals table.",
)
@click.option("--num-classes", type=click.IntRange(min=1), default=40, show_default=True)
@click_options.output_format
def bench(
    dims,
    pairs,
    groups,
    grid_size,
    order,
    degree_num,
    degree_den,
    num_points,
    num_classes,
    output_format,
):
    """
    Parameter and FLOP counts of single mlp, vanilla_kan and efficient_kan
    layers across widths, then the totals of whole models with each
    backend.
    """
    shapes = [(a, b) for a in dims for b in dims] if pairs else [(d, d) for d in dims]
    hyper = {"grid_size": grid_size, "order": order}
    rational = {"degree_num": degree_num, "degree_den": degree_den}
    rows = []
    for d_in, d_out in shapes:
        variants = [("mlp", None), ("vanilla_kan", None)]
        variants.extend(("efficient_kan", g) for g in groups if d_in % g == 0)
        mlp_count = None
        for kind, g in variants:
            rep = param_count(kind, d_in, d_out, **hyper, **rational, groups=g or 1)
            mlp_count = mlp_count or rep.formula_count
            rows.append(
                {
                    "kind": kind,
                    "d_in": d_in,
                    "d_out": d_out,
                    "groups": g,
                    "formula_params": rep.formula_count,
                    "stored_params": rep.stored_count,
                    "ratio_to_mlp": rep.formula_count / mlp_count,
                    "flops": layer_flops(kind, d_in, d_out, **hyper, **rational),
                }
            )
    headers = list(rows[0]) if rows else []
    ndjson = use_ndjson(output_format)
    if not ndjson:
        click.echo(bold("Single layers"))
    emit_rows(headers, rows, output_format)

    base = default_config(num_points, num_classes)
    totals = []
    for backend in ("bspline", "rational", "mlp"):
        cfg = base.with_backend(backend)
        totals.append(
            {
                "backend": backend,
                "num_points": num_points,
                "params": PointKan(cfg).parameter_count(),
                "flops": estimate_flops(cfg).total,
            }
        )
    if ndjson:
        for row in totals:
            row["convention"] = CONVENTION
        emit_rows([], totals, output_format)
    else:
        click.echo("\n" + bold("Models"))
        emit_rows(list(totals[0]), totals, output_format)
        click.echo(f"\nFLOP convention: {CONVENTION}")
