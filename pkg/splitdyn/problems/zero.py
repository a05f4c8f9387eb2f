import numpy as np

from ..operator import SplitProblem, zero_cocoercive, zero_operator
from ..problem import ProblemBuilder, ProblemSpec, parse_floats
from ..utils import ParameterError


def build_zero(dim: int = 1) -> ProblemSpec:
    if dim < 1:
        raise ParameterError(f"dimension must be positive, got {dim}")
    problem = SplitProblem(zero_operator(dim), zero_cocoercive(dim), np.zeros(dim))
    return ProblemSpec(f"zero:{dim}", problem, None, "free motion, T = 0")


class ZeroBuilder(ProblemBuilder):
    NAMES = ("zero",)

    def build(self, kind: str, args: str) -> ProblemSpec:
        values = parse_floats(args)
        return build_zero(int(values[0]) if values else 1)


Builder = ZeroBuilder

__all__ = ["Builder", "build_zero"]
