import numpy as np

from ..operator import CocoerciveOp, MonotoneOp, SplitProblem
from ..problem import ProblemBuilder, ProblemSpec

_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def rotation_resolvent_matrix(gamma: float) -> np.ndarray:
    """(I + gamma A)^-1 = 1/(1 + gamma^2) [[1, gamma], [-gamma, 1]]."""
    return np.array([[1.0, gamma], [-gamma, 1.0]]) / (1.0 + gamma * gamma)


def rotation_fb_matrix(lam: float, gamma: float) -> np.ndarray:
    """T_{lam,gamma} = (I - (1 - gamma) J_gamma) / lam as a matrix.

    Diagonal (gamma^2 + gamma)/(lam(1 + gamma^2)), off-diagonal +-gamma(gamma - 1)/(lam(1 + gamma^2)).
    """
    scale = lam * (1.0 + gamma * gamma)
    diag = (gamma * gamma + gamma) / scale
    off = gamma * (gamma - 1.0) / scale
    return np.array([[diag, off], [-off, diag]])


def build_rotation_identity() -> ProblemSpec:
    """A(x1, x2) = (-x2, x1), a continuous monotone (so maximal) skew map; B = id, 1-cocoercive."""
    a = MonotoneOp(2, lambda gamma, x: rotation_resolvent_matrix(gamma) @ x, lambda x: _ROTATION @ x, label="rotation")
    b = CocoerciveOp(2, lambda x: np.array(x, dtype=float), 1.0, label="identity")
    return ProblemSpec("rotation_identity", SplitProblem(a, b, np.zeros(2)), None, "skew rotation plus identity")


class RotationIdentityBuilder(ProblemBuilder):
    NAMES = ("rotation_identity",)

    def build(self, kind: str, args: str) -> ProblemSpec:
        return build_rotation_identity()


Builder = RotationIdentityBuilder

__all__ = ["Builder", "build_rotation_identity", "rotation_resolvent_matrix", "rotation_fb_matrix"]
