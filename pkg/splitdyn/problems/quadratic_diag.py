import numpy as np

from ..operator import SplitProblem, diagonal_cocoercive, zero_operator
from ..problem import Objective, ProblemBuilder, ProblemSpec, parse_floats
from ..utils import ParameterError, as_vector


def build_quadratic_diag(coeffs) -> ProblemSpec:
    """A = 0, B = grad g for g(x) = 1/2 sum c_i x_i^2; B is 1/max(c)-cocoercive."""
    coeffs = as_vector(coeffs)
    if coeffs.size == 0:
        raise ParameterError("quadratic_diag needs at least one coefficient")
    b = diagonal_cocoercive(coeffs, label="quadratic_diag")
    dim = coeffs.shape[0]
    objective = Objective(
        f=lambda x: 0.0,
        g=lambda x: 0.5 * float(np.dot(coeffs * x, x)),
        min_value=0.0,
    )
    name = "quadratic_diag:" + ",".join(f"{c:g}" for c in coeffs)
    return ProblemSpec(name, SplitProblem(zero_operator(dim), b, np.zeros(dim)), objective, "smooth diagonal quadratic")


class QuadraticDiagBuilder(ProblemBuilder):
    NAMES = ("quadratic_diag",)

    def build(self, kind: str, args: str) -> ProblemSpec:
        return build_quadratic_diag(parse_floats(args) or [1.0])


Builder = QuadraticDiagBuilder

__all__ = ["Builder", "build_quadratic_diag"]
