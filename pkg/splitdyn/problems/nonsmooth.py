import numpy as np

from ..operator import MonotoneOp, SplitProblem, zero_cocoercive
from ..problem import Objective, ProblemBuilder, ProblemSpec, parse_floats
from ..utils import ParameterError

KINDS = ("half_square", "abs", "abs_plus_half_square")


def soft_threshold(x, gamma: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - gamma, 0.0)


def _check_kind(kind: str):
    if kind not in KINDS:
        raise ParameterError(f"unknown nonsmooth kind `{kind}`, expected one of {', '.join(KINDS)}")


def prox(kind: str, gamma: float, x) -> np.ndarray:
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    if kind == "half_square":
        return x / (1.0 + gamma)
    if kind == "abs":
        return soft_threshold(x, gamma)
    return soft_threshold(x, gamma) / (1.0 + gamma)


def value(kind: str, x) -> float:
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    if kind == "half_square":
        return 0.5 * float(np.dot(x, x))
    if kind == "abs":
        return float(np.sum(np.abs(x)))
    return float(np.sum(np.abs(x))) + 0.5 * float(np.dot(x, x))


def moreau_envelope(kind: str, gamma: float, x) -> float:
    """f_gamma(x) = min_y f(y) + |x - y|^2 / (2 gamma)."""
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    if kind == "half_square":
        return float(np.dot(x, x)) / (2.0 * (1.0 + gamma))
    if kind == "abs":
        ax = np.abs(x)
        return float(np.sum(np.where(ax <= gamma, ax * ax / (2.0 * gamma), ax - gamma / 2.0)))
    p = prox(kind, gamma, x)
    return value(kind, p) + float(np.dot(p - x, p - x)) / (2.0 * gamma)


def build_nonsmooth_1d(kind: str, dim: int = 1) -> ProblemSpec:
    """A = subdifferential of a separable f, B = 0. ``dim`` > 1 sums f over coordinates."""
    _check_kind(kind)
    if dim < 1:
        raise ParameterError(f"dimension must be positive, got {dim}")
    a = MonotoneOp(dim, lambda gamma, x: prox(kind, gamma, x), label=kind)
    objective = Objective(
        f=lambda x: value(kind, x),
        g=lambda x: 0.0,
        min_value=0.0,
        envelope=lambda gamma, x: moreau_envelope(kind, gamma, x),
    )
    name = kind if dim == 1 else f"{kind}:{dim}"
    return ProblemSpec(name, SplitProblem(a, zero_cocoercive(dim), np.zeros(dim)), objective, f"nonsmooth f = {kind}")


class NonsmoothBuilder(ProblemBuilder):
    NAMES = KINDS

    def build(self, kind: str, args: str) -> ProblemSpec:
        values = parse_floats(args)
        return build_nonsmooth_1d(kind, int(values[0]) if values else 1)


Builder = NonsmoothBuilder

__all__ = ["Builder", "KINDS", "build_nonsmooth_1d", "moreau_envelope", "prox", "soft_threshold", "value"]
