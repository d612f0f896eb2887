from pointkan.kan.horner import horner_eval
from pointkan.kan.params import ParamCountReport, param_count
from pointkan.kan.rational import RationalGroupLayer
from pointkan.kan.spline import KanLayer, SplineGrid, bspline_basis
from pointkan.kan.stack import BACKENDS, KanStack, stack_widths

__all__ = [
    "BACKENDS",
    "KanLayer",
    "KanStack",
    "ParamCountReport",
    "RationalGroupLayer",
    "SplineGrid",
    "bspline_basis",
    "horner_eval",
    "param_count",
    "stack_widths",
]
