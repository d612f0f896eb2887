"""
Closed-form parameter counts for a single layer of each kind, alongside the
number of scalars the corresponding layer class actually stores.

    mlp            d_in d_out + d_out
    vanilla_kan    d_in d_out (G + k + 2) + d_out
    efficient_kan  d_in d_out + d_out + (n + m g)

The efficient count leaves out the g constant terms a_0 of the grouped
numerators, which `RationalGroupLayer` stores, so its `stored_count` is g
higher than `formula_count`.
"""

from dataclasses import dataclass

import numpy as np

from pointkan.errors import InvalidArgumentError
from pointkan.kan.rational import RationalGroupLayer
from pointkan.kan.spline import KanLayer, SplineGrid
from pointkan.nn import Linear

LAYER_KINDS = ("mlp", "vanilla_kan", "efficient_kan")


@dataclass(frozen=True)
class ParamCountReport:
    kind: str
    d_in: int
    d_out: int
    formula_count: int
    stored_count: int

    @property
    def matches(self) -> bool:
        return self.formula_count == self.stored_count


def formula_count(
    kind: str,
    d_in: int,
    d_out: int,
    *,
    grid_size=5,
    order=3,
    degree_num=5,
    degree_den=4,
    groups=1,
) -> int:
    match kind:
        case "mlp":
            return d_in * d_out + d_out
        case "vanilla_kan":
            return d_in * d_out * (grid_size + order + 2) + d_out
        case "efficient_kan":
            return d_in * d_out + d_out + (degree_den + degree_num * groups)
    msg = f"Unknown layer kind {kind!r}, expecting one of {LAYER_KINDS}"
    raise InvalidArgumentError(msg)


def param_count(
    kind: str,
    d_in: int,
    d_out: int,
    *,
    grid_size=5,
    order=3,
    degree_num=5,
    degree_den=4,
    groups=1,
) -> ParamCountReport:
    for name, val in (("d_in", d_in), ("d_out", d_out)):
        if val < 1:
            msg = f"{name} must be positive, not {val}"
            raise InvalidArgumentError(msg)
    formula = formula_count(
        kind,
        d_in,
        d_out,
        grid_size=grid_size,
        order=order,
        degree_num=degree_num,
        degree_den=degree_den,
        groups=groups,
    )

    # Parameter values do not matter, only how many there are
    rng = np.random.default_rng(0)
    match kind:
        case "mlp":
            layer = Linear(d_in, d_out, rng)
        case "vanilla_kan":
            layer = KanLayer(d_in, d_out, rng, SplineGrid(grid_size=grid_size, order=order))
        case "efficient_kan":
            layer = RationalGroupLayer(d_in, d_out, rng, groups, degree_num, degree_den)

    return ParamCountReport(kind, d_in, d_out, formula, layer.parameter_count())
