import logging
import math
import typing

import numpy as np

from .operator import MonotoneOp, SplitProblem, fb_modulus, fb_operator_eval
from .schedule import GammaSchedule, ValidationReport
from .utils import InnerSolverError, ParameterError, ValidationError, as_vector

__all__ = [
    "SOLVER_MODES",
    "CLOSED_FORM_VARIANTS",
    "DiscreteParams",
    "InnerSolverConfig",
    "IterateState",
    "IterationRecord",
    "IterateRun",
    "BackwardResult",
    "extrapolate",
    "backward_resolve",
    "step",
    "b_zero_step",
    "initial_state",
    "run",
]

_LOGGER = logging.getLogger(__name__)

SOLVER_MODES = ("general", "b_zero")
CLOSED_FORM_VARIANTS = ("exact", "envelope", "printed")


class DiscreteParams:
    """Parameters of the inertial proximal scheme.

    lambda_k = lambda0 * k^2 and gamma_k = gamma(k), both read at max(k, 1) so the k = 0 values stay positive.
    """

    def __init__(self, alpha: float, xi: float, lambda0: float, gamma: GammaSchedule, n_iters: int):
        self._alpha = float(alpha)
        self._xi = float(xi)
        self._lambda0 = float(lambda0)
        self._gamma = gamma
        self._n_iters = int(n_iters)
        if not self._lambda0 > 0:
            raise ParameterError(f"lambda0 must be positive, got {lambda0}")
        if self._n_iters < 1:
            raise ParameterError(f"n_iters must be positive, got {n_iters}")

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def xi(self) -> float:
        return self._xi

    @property
    def lambda0(self) -> float:
        return self._lambda0

    @property
    def gamma(self) -> GammaSchedule:
        return self._gamma

    @property
    def n_iters(self) -> int:
        return self._n_iters

    def lambda_k(self, k: int) -> float:
        index = max(k, 1)
        return self._lambda0 * index * index

    def gamma_k(self, k: int) -> float:
        return self._gamma.value(float(max(k, 1)))

    def alpha_k(self, k: int) -> float:
        return 1.0 - self._alpha / k

    def validate(self, beta: float, mode: str = "general") -> ValidationReport:
        if mode not in SOLVER_MODES:
            raise ParameterError(f"unknown solver mode `{mode}`, expected one of {', '.join(SOLVER_MODES)}")
        violations: typing.List[str] = []
        alpha, xi = self._alpha, self._xi
        if not alpha > 1:
            violations.append(f"alpha <= 1: alpha > 1 required (alpha={alpha:g})")
        if not xi >= 0:
            violations.append(f"xi < 0: xi >= 0 required (xi={xi:g})")
        if alpha > 1:
            c = 2.0 * xi + 1.0 if mode == "b_zero" else 4.0 * xi + 2.0
            bound = c / (alpha - 1.0) ** 2
            if not self._lambda0 > bound:
                violations.append(
                    f"lambda0 > {c:g}/(alpha-1)^2 = {bound:.6g} fails (lambda0={self._lambda0:g})"
                )
        inf_gamma, sup_gamma = self._gamma.bounds(1.0, float(self._n_iters + 1))
        if not inf_gamma > 0:
            violations.append(f"inf gamma_k > 0 fails (inf={inf_gamma:g})")
        if mode == "general":
            if not sup_gamma < 2.0 * beta:
                violations.append(f"sup gamma_k < 2 beta = {2.0 * beta:g} fails (sup={sup_gamma:g})")
            if not math.isfinite(self._gamma.limit_ratio(1.0)):
                violations.append(f"(gamma_k - gamma_k-1)/gamma_k = O(1/k) fails for {self._gamma.get_data()}")
        return ValidationReport(f"discrete {mode}", violations, [])

    def __repr__(self):
        return (
            f"DiscreteParams(alpha={self._alpha:g}, xi={self._xi:g}, lambda0={self._lambda0:g}, "
            f"gamma={self._gamma.get_data()}, n_iters={self._n_iters})"
        )


class InnerSolverConfig:
    def __init__(self, config: typing.Optional[typing.Dict[str, typing.Any]] = None):
        config = config or {}
        self.tol = float(config.get("inner_tol", 1e-12))
        self.max_iters = int(config.get("inner_max_iters", 200))
        if not self.tol > 0:
            raise ParameterError(f"inner_tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ParameterError(f"inner_max_iters must be positive, got {self.max_iters}")


class IterateState(typing.NamedTuple):
    """x_{k-1}, x_k and the cached T_{k-1}(x_{k-1}), T_k(x_k).

    ``y``, ``inner_iterations`` and ``backward_residual`` describe the backward step that produced x_k.
    """

    k: int
    x_prev: np.ndarray
    x_curr: np.ndarray
    t_prev: np.ndarray
    t_curr: np.ndarray
    y: typing.Optional[np.ndarray] = None
    inner_iterations: int = 0
    backward_residual: float = 0.0


class IterationRecord(typing.NamedTuple):
    k: int
    x: np.ndarray
    y: np.ndarray
    norm_dx_times_k: float
    norm_residual_times_gamma: float
    norm_xy_times_k: float
    inner_iters: int
    backward_residual: float


class BackwardResult(typing.NamedTuple):
    x: np.ndarray
    t_op: np.ndarray
    iterations: int
    residual: float
    damped: bool


class IterateRun:
    def __init__(self, params: DiscreteParams, records: typing.List[IterationRecord], mode: str, variant: str):
        self.params = params
        self.records = records
        self.mode = mode
        self.variant = variant

    def ks(self) -> np.ndarray:
        return np.array([r.k for r in self.records])

    def positions(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    def series(self, field: str) -> np.ndarray:
        return np.array([getattr(r, field) for r in self.records], dtype=float)

    def final(self) -> IterationRecord:
        return self.records[-1]

    def __len__(self):
        return len(self.records)


def extrapolate(state: IterateState, params: DiscreteParams) -> np.ndarray:
    """y_k = x_k + alpha_k (x_k - x_{k-1}) - xi (T_k(x_k) - T_{k-1}(x_{k-1})), alpha_k = 1 - alpha/k."""
    if state.k < 1:
        raise ParameterError(f"extrapolation starts at k = 1, got k = {state.k}")
    return (
        state.x_curr
        + params.alpha_k(state.k) * (state.x_curr - state.x_prev)
        - params.xi * (state.t_curr - state.t_prev)
    )


def backward_resolve(
    p: SplitProblem, lam_next: float, gam_next: float, y, cfg: typing.Optional[InnerSolverConfig] = None
) -> BackwardResult:
    """Solve x + T(x) = y for T = T_{lam_next, gam_next}.

    T is Lipschitz with q = 1/modulus <= 2/lam. For q < 1 the map x -> y - T(x) is a contraction; otherwise
    x -> x - theta (x + T(x) - y) with theta = 2/(2 + q) contracts with factor q/(2 + q), since id + T is
    strongly monotone and T cocoercive.
    """
    cfg = cfg or InnerSolverConfig()
    y = as_vector(y, p.dim)
    q = 1.0 / fb_modulus(lam_next, gam_next, p.beta)
    damped = q >= 1
    theta = 2.0 / (2.0 + q) if damped else 1.0
    if damped:
        _LOGGER.debug("damped inner iteration: q=%.3g theta=%.3g", q, theta)

    x = y.copy()
    residual = math.inf
    for iteration in range(cfg.max_iters + 1):
        t_op = fb_operator_eval(p, lam_next, gam_next, x)
        gap = x + t_op - y
        residual = float(np.linalg.norm(gap))
        if residual <= cfg.tol:
            return BackwardResult(x, t_op, iteration, residual, damped)
        x = x - theta * gap
    raise InnerSolverError(residual, cfg.max_iters)


def _advance(state: IterateState, x_next, t_next, y, iterations: int, residual: float) -> IterateState:
    return IterateState(state.k + 1, state.x_curr, x_next, state.t_curr, t_next, y, iterations, residual)


def step(
    state: IterateState, params: DiscreteParams, p: SplitProblem, cfg: typing.Optional[InnerSolverConfig] = None
) -> IterateState:
    y = extrapolate(state, params)
    k_next = state.k + 1
    result = backward_resolve(p, params.lambda_k(k_next), params.gamma_k(k_next), y, cfg)
    return _advance(state, result.x, result.t_op, y, result.iterations, result.residual)


def b_zero_step(state: IterateState, params: DiscreteParams, a: MonotoneOp, variant: str = "exact") -> IterateState:
    """The scheme written with resolvents of A alone (B = 0).

    exact:    x_{k+1} = lam/(lam+1) y + 1/(lam+1) J_{gamma(1+1/lam) A}(y)
    envelope: x_{k+1} = lam^2/(lam^2+gamma) y + gamma/(lam^2+gamma) J_{(lam+gamma/lam) A}(y)
    printed:  as envelope with gamma_k in the second numerator
    where lam = lambda_{k+1}, gamma = gamma_{k+1}. Only ``exact`` inverts id + T for every gamma schedule.
    """
    if variant not in CLOSED_FORM_VARIANTS:
        raise ParameterError(f"unknown closed form `{variant}`, expected one of {', '.join(CLOSED_FORM_VARIANTS)}")
    k = state.k
    lam_prev, lam_curr = params.lambda_k(k - 1), params.lambda_k(k)
    j_prev = state.x_prev - lam_prev * state.t_prev
    j_curr = state.x_curr - lam_curr * state.t_curr
    xi = params.xi
    delta = state.x_curr - state.x_prev
    y = (
        (1.0 - xi * (1.0 / lam_curr - 1.0 / lam_prev)) * state.x_curr
        + (params.alpha_k(k) - xi / lam_prev) * delta
        + xi * (j_curr / lam_curr - j_prev / lam_prev)
    )

    lam, gamma = params.lambda_k(k + 1), params.gamma_k(k + 1)
    if variant == "exact":
        x_next = lam / (lam + 1.0) * y + 1.0 / (lam + 1.0) * a.resolvent(gamma * (1.0 + 1.0 / lam), y)
    else:
        numerator = gamma if variant == "envelope" else params.gamma_k(k)
        denominator = lam * lam + gamma
        x_next = lam * lam / denominator * y + numerator / denominator * a.resolvent(lam + gamma / lam, y)

    t_next = (x_next - a.resolvent(gamma, x_next)) / lam
    residual = float(np.linalg.norm(x_next + t_next - y))
    return _advance(state, x_next, t_next, y, 0, residual)


def initial_state(p: SplitProblem, params: DiscreteParams, x0, x1) -> IterateState:
    x0, x1 = as_vector(x0, p.dim), as_vector(x1, p.dim)
    t0 = fb_operator_eval(p, params.lambda_k(0), params.gamma_k(0), x0)
    t1 = fb_operator_eval(p, params.lambda_k(1), params.gamma_k(1), x1)
    return IterateState(1, x0, x1, t0, t1)


def run(
    p: SplitProblem,
    params: DiscreteParams,
    x0,
    x1,
    mode: str = "general",
    closed_form: typing.Optional[str] = None,
    cfg: typing.Optional[InnerSolverConfig] = None,
) -> IterateRun:
    report = params.validate(p.beta, mode)
    if not report.passed:
        raise ValidationError(report)
    if closed_form is not None:
        if not p.b.is_zero:
            raise ParameterError("the closed-form update needs a problem with B = 0")
        if closed_form == "printed":
            _LOGGER.warning("printed closed form selected: its coefficients do not sum to one")

    _LOGGER.info("iterating %r for %d steps (%r, closed form %s)", p, params.n_iters, params, closed_form)
    state = initial_state(p, params, x0, x1)
    records: typing.List[IterationRecord] = []
    for _ in range(params.n_iters):
        if closed_form is None:
            nxt = step(state, params, p, cfg)
        else:
            nxt = b_zero_step(state, params, p.a, closed_form)
        k = state.k
        assert nxt.y is not None
        records.append(
            IterationRecord(
                k=k,
                x=state.x_curr,
                y=nxt.y,
                norm_dx_times_k=k * float(np.linalg.norm(nxt.x_curr - state.x_curr)),
                norm_residual_times_gamma=params.lambda_k(k) * float(np.linalg.norm(state.t_curr)),
                norm_xy_times_k=k * float(np.linalg.norm(state.x_curr - nxt.y)),
                inner_iters=nxt.inner_iterations,
                backward_residual=nxt.backward_residual,
            )
        )
        state = nxt
    _LOGGER.debug("inner iterations: %d total", sum(r.inner_iters for r in records))
    return IterateRun(params, records, mode, closed_form or "inner")
