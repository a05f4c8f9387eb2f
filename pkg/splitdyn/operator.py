import math
import typing

import numpy as np

from .utils import DimensionError, ParameterError, as_vector

__all__ = [
    "MonotoneOp",
    "CocoerciveOp",
    "SplitProblem",
    "CertificateReport",
    "resolvent_eval",
    "yosida_eval",
    "envelope_eval",
    "fb_operator_eval",
    "fb_modulus",
    "residual_eval",
    "cocoercivity_certificate",
    "lipschitz_certificate",
    "firm_nonexpansive_margin",
    "resolvent_gap",
    "fb_bound_gap",
    "zero_operator",
    "zero_cocoercive",
    "linear_monotone",
    "diagonal_cocoercive",
]

Vector = np.ndarray
VectorMap = typing.Callable[[Vector], Vector]
ResolventOracle = typing.Callable[[float, Vector], Vector]


class MonotoneOp:
    """A maximally monotone operator known through its resolvent J_{gamma A} = (id + gamma A)^-1.

    ``forward`` is only given for single-valued operators and is used by consistency checks.
    """

    def __init__(
        self,
        dim: int,
        resolvent: ResolventOracle,
        forward: typing.Optional[VectorMap] = None,
        label: str = "A",
    ):
        if int(dim) <= 0:
            raise DimensionError("dimension must be positive")
        self._dim = int(dim)
        self._resolvent = resolvent
        self._forward = forward
        self._label = label

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def label(self) -> str:
        return self._label

    @property
    def forward(self) -> typing.Optional[VectorMap]:
        return self._forward

    def resolvent(self, gamma: float, x: Vector) -> Vector:
        return as_vector(self._resolvent(gamma, x), self._dim)

    def __repr__(self):
        return f"MonotoneOp({self._label}, dim={self._dim})"


class CocoerciveOp:
    """A single-valued beta-cocoercive operator. The zero operator carries beta = inf."""

    def __init__(self, dim: int, forward: VectorMap, beta: float, label: str = "B", is_zero: bool = False):
        if int(dim) <= 0:
            raise DimensionError("dimension must be positive")
        if not beta > 0:
            raise ParameterError(f"cocoercivity modulus must be positive, got {beta}")
        self._dim = int(dim)
        self._forward = forward
        self._beta = float(beta)
        self._label = label
        self._is_zero = is_zero

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def beta(self) -> float:
        return self._beta

    @property
    def label(self) -> str:
        return self._label

    @property
    def is_zero(self) -> bool:
        return self._is_zero

    def __call__(self, x: Vector) -> Vector:
        return as_vector(self._forward(x), self._dim)

    def __repr__(self):
        return f"CocoerciveOp({self._label}, dim={self._dim}, beta={self._beta:g})"


class SplitProblem:
    def __init__(self, a: MonotoneOp, b: CocoerciveOp, known_zero=None):
        if a.dim != b.dim:
            raise DimensionError(f"operator dimensions differ: {a.dim} != {b.dim}")
        self._a = a
        self._b = b
        self._known_zero = None if known_zero is None else as_vector(known_zero, a.dim)

    @property
    def a(self) -> MonotoneOp:
        return self._a

    @property
    def b(self) -> CocoerciveOp:
        return self._b

    @property
    def dim(self) -> int:
        return self._a.dim

    @property
    def beta(self) -> float:
        return self._b.beta

    @property
    def known_zero(self) -> typing.Optional[Vector]:
        return self._known_zero

    def gamma_bound(self) -> float:
        return 2.0 * self._b.beta

    def __repr__(self):
        return f"SplitProblem({self._a.label} + {self._b.label}, dim={self.dim})"


class CertificateReport(typing.NamedTuple):
    margin: float
    modulus: float
    samples: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.margin >= -self.tol


def _check_positive(name: str, value: float):
    if not value > 0 or not math.isfinite(value):
        raise ParameterError(f"{name} must be a positive real, got {value}")


def _check_gamma(p: SplitProblem, gamma: float):
    _check_positive("gamma", gamma)
    if gamma >= p.gamma_bound():
        raise ParameterError(f"gamma={gamma:g} must lie in (0, 2*beta) = (0, {p.gamma_bound():g})")


def resolvent_eval(a: MonotoneOp, gamma: float, x) -> Vector:
    _check_positive("gamma", gamma)
    return a.resolvent(gamma, as_vector(x, a.dim))


def yosida_eval(a: MonotoneOp, lam: float, x) -> Vector:
    _check_positive("lam", lam)
    x = as_vector(x, a.dim)
    return (x - a.resolvent(lam, x)) / lam


def envelope_eval(a: MonotoneOp, lam: float, gamma: float, x) -> Vector:
    """Generalized Moreau envelope A_{lam,gamma} = (id - J_{gamma A}) / lam, the B = 0 operator."""
    _check_positive("lam", lam)
    _check_positive("gamma", gamma)
    x = as_vector(x, a.dim)
    return (x - a.resolvent(gamma, x)) / lam


def _forward_backward(p: SplitProblem, gamma: float, x: Vector) -> Vector:
    if p.b.is_zero:
        return p.a.resolvent(gamma, x)
    return p.a.resolvent(gamma, x - gamma * p.b(x))


def fb_operator_eval(p: SplitProblem, lam: float, gamma: float, x) -> Vector:
    _check_positive("lam", lam)
    _check_gamma(p, gamma)
    x = as_vector(x, p.dim)
    return (x - _forward_backward(p, gamma, x)) / lam


def fb_modulus(lam: float, gamma: float, beta: float) -> float:
    """Cocoercivity modulus lam*(4 beta - gamma)/(4 beta) of T_{lam,gamma}; lam when B = 0."""
    if math.isinf(beta):
        return lam
    return lam * (4.0 * beta - gamma) / (4.0 * beta)


def residual_eval(p: SplitProblem, gamma: float, x) -> Vector:
    """A_gamma(x - gamma Bx) + Bx, which equals (x - J_{gamma A}(x - gamma Bx)) / gamma."""
    _check_gamma(p, gamma)
    x = as_vector(x, p.dim)
    return (x - _forward_backward(p, gamma, x)) / gamma


def _pairs(samples) -> typing.List[typing.Tuple[Vector, Vector]]:
    pairs = [(as_vector(x), as_vector(y)) for x, y in samples]
    if not pairs:
        raise ParameterError("at least one sample pair is required")
    return pairs


def cocoercivity_certificate(operator: VectorMap, modulus: float, samples, tol: float = 1e-9) -> CertificateReport:
    """min over pairs of <Tx - Ty, x - y> - modulus * |Tx - Ty|^2."""
    margin = math.inf
    pairs = _pairs(samples)
    for x, y in pairs:
        tx, ty = as_vector(operator(x)), as_vector(operator(y))
        if tx.shape != x.shape or ty.shape != y.shape:
            raise DimensionError(f"operator maps dimension {x.shape[0]} to {tx.shape[0]}")
        diff = tx - ty
        margin = min(margin, float(np.dot(diff, x - y) - modulus * np.dot(diff, diff)))
    return CertificateReport(margin, modulus, len(pairs), tol)


def lipschitz_certificate(operator: VectorMap, constant: float, samples, tol: float = 1e-9) -> CertificateReport:
    """min over pairs of constant * |x - y| - |Tx - Ty|."""
    margin = math.inf
    pairs = _pairs(samples)
    for x, y in pairs:
        diff = as_vector(operator(x)) - as_vector(operator(y))
        if diff.shape != x.shape:
            raise DimensionError(f"operator maps dimension {x.shape[0]} to {diff.shape[0]}")
        margin = min(margin, float(constant * np.linalg.norm(x - y) - np.linalg.norm(diff)))
    return CertificateReport(margin, constant, len(pairs), tol)


def firm_nonexpansive_margin(a: MonotoneOp, gamma: float, samples, tol: float = 1e-10) -> CertificateReport:
    return cocoercivity_certificate(lambda x: resolvent_eval(a, gamma, x), 1.0, samples, tol)


def resolvent_gap(a: MonotoneOp, gamma1: float, gamma2: float, x) -> float:
    """|gamma1 - gamma2| * |A_gamma1 x| - |J_gamma1 x - J_gamma2 x|, nonnegative for monotone A."""
    x = as_vector(x, a.dim)
    lhs = np.linalg.norm(resolvent_eval(a, gamma1, x) - resolvent_eval(a, gamma2, x))
    rhs = abs(gamma1 - gamma2) * np.linalg.norm(yosida_eval(a, gamma1, x))
    return float(rhs - lhs)


def fb_bound_gap(p: SplitProblem, lam1: float, gamma1: float, lam2: float, gamma2: float, x, y, anchor) -> float:
    """Slack in |lam1 T1(x) - lam2 T2(y)| <= 4|x-y| + 4 beta |dg|/gamma1 |Bx| + 2 |dg|/gamma1 |x - anchor|."""
    x, y, anchor = as_vector(x, p.dim), as_vector(y, p.dim), as_vector(anchor, p.dim)
    lhs = np.linalg.norm(lam1 * fb_operator_eval(p, lam1, gamma1, x) - lam2 * fb_operator_eval(p, lam2, gamma2, y))
    dgamma = abs(gamma1 - gamma2) / gamma1
    bx = 0.0 if p.b.is_zero else 4.0 * p.beta * dgamma * np.linalg.norm(p.b(x))
    rhs = 4.0 * np.linalg.norm(x - y) + bx + 2.0 * dgamma * np.linalg.norm(x - anchor)
    return float(rhs - lhs)


def zero_operator(dim: int) -> MonotoneOp:
    return MonotoneOp(dim, lambda gamma, x: np.array(x, dtype=float), lambda x: np.zeros(dim), label="0")


def zero_cocoercive(dim: int) -> CocoerciveOp:
    return CocoerciveOp(dim, lambda x: np.zeros(dim), math.inf, label="0", is_zero=True)


def linear_monotone(matrix, label: str = "M") -> MonotoneOp:
    """x -> Mx for a matrix with positive semidefinite symmetric part; J_{gamma M} = (I + gamma M)^-1."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
    identity = np.eye(matrix.shape[0])

    def resolvent(gamma: float, x: Vector) -> Vector:
        return np.linalg.solve(identity + gamma * matrix, x)

    return MonotoneOp(matrix.shape[0], resolvent, lambda x: matrix @ x, label=label)


def diagonal_cocoercive(coeffs, label: str = "diag") -> CocoerciveOp:
    """Gradient of 1/2 sum c_i x_i^2; 1/max(c)-cocoercive (Baillon-Haddad)."""
    coeffs = as_vector(coeffs)
    if np.any(coeffs <= 0):
        raise ParameterError(f"coefficients must be positive, got {coeffs.tolist()}")
    return CocoerciveOp(coeffs.shape[0], lambda x: coeffs * x, 1.0 / float(np.max(coeffs)), label=label)
