import numpy as np

from ..operator import SplitProblem
from ..problem import Objective, ProblemBuilder, ProblemSpec, split_name
from ..utils import ConfigError, DimensionError, ParameterError
from .nonsmooth import KINDS, NonsmoothBuilder
from .quadratic_diag import QuadraticDiagBuilder


def build_composite(fspec: ProblemSpec, gspec: ProblemSpec) -> ProblemSpec:
    if fspec.dim != gspec.dim:
        raise DimensionError(f"f has dimension {fspec.dim}, g has dimension {gspec.dim}")
    if fspec.objective is None or gspec.objective is None:
        raise ParameterError("composite problems need function values for f and g")
    if not np.array_equal(fspec.known_zero, gspec.known_zero):
        raise ParameterError("f and g minimizers differ: no closed-form minimizer for f + g")
    problem = SplitProblem(fspec.problem.a, gspec.problem.b, fspec.known_zero)
    objective = Objective(
        f=fspec.objective.f,
        g=gspec.objective.g,
        min_value=fspec.objective.min_value + gspec.objective.min_value,
    )
    return ProblemSpec(f"composite:{fspec.name}+{gspec.name}", problem, objective, "nonsmooth f plus quadratic g")


class CompositeBuilder(ProblemBuilder):
    NAMES = ("composite",)

    def build(self, kind: str, args: str) -> ProblemSpec:
        f_name, plus, g_name = args.partition("+")
        f_kind, f_args = split_name(f_name)
        g_kind, g_args = split_name(g_name)
        if not plus or f_kind not in KINDS or g_kind != "quadratic_diag":
            raise ConfigError(f"expected composite:<f>+quadratic_diag:<coeffs>, got `composite:{args}`")
        return build_composite(NonsmoothBuilder().build(f_kind, f_args), QuadraticDiagBuilder().build(g_kind, g_args))


Builder = CompositeBuilder

__all__ = ["Builder", "build_composite"]
