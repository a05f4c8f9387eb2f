import logging
import math
import typing

import numpy as np

from .operator import SplitProblem, fb_operator_eval, residual_eval
from .schedule import DampingParams, GammaSchedule, LambdaSchedule, validate
from .utils import DimensionError, DivergenceError, ParameterError, ValidationError, as_vector

__all__ = [
    "PhaseState",
    "TrajectorySample",
    "Trajectory",
    "StepperConfig",
    "SplitDynamics",
    "vector_field",
    "initial_phase",
    "recover_velocity",
    "integrate",
    "free_motion",
    "euler_power_solution",
]

_LOGGER = logging.getLogger(__name__)


class PhaseState(typing.NamedTuple):
    """(t, x, y); y is the auxiliary variable when xi > 0 and the velocity when xi = 0."""

    t: float
    x: np.ndarray
    y: np.ndarray


class TrajectorySample(typing.NamedTuple):
    t: float
    x: np.ndarray
    xdot: np.ndarray
    t_op: np.ndarray
    residual: np.ndarray
    lam: float
    gamma: float

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.xdot))


class StepperConfig:
    """Fixed-step classical Runge-Kutta settings.

    ``step`` defaults to 1e-3 of the horizon, capped at 1e-2. The step actually used is shrunk so that
    the horizon splits into a whole number of steps and samples fall on the step grid.
    """

    def __init__(self, config: typing.Optional[typing.Dict[str, typing.Any]] = None):
        config = config or {}
        step = config.get("step")
        self.step: typing.Optional[float] = None if step is None else float(step)
        self.samples = int(config.get("samples", 500))
        self.divergence_bound = float(config.get("divergence_bound", 1e12))
        if self.step is not None and not self.step > 0:
            raise ParameterError(f"step must be positive, got {self.step}")
        if self.samples < 2:
            raise ParameterError("at least two samples are required")

    def grid(self, t0: float, t_end: float) -> typing.Tuple[int, int, float]:
        """(number of steps, steps per sample, step size).

        Long horizons emit exactly ``samples`` equally spaced samples; short ones sample every step.
        """
        span = t_end - t0
        step = self.step if self.step is not None else min(1e-3 * span, 1e-2)
        n_steps = max(1, math.ceil(span / step - 1e-9))
        intervals = self.samples - 1
        if n_steps < intervals:
            return n_steps, 1, span / n_steps
        sample_every = math.ceil(n_steps / intervals)
        n_steps = sample_every * intervals
        return n_steps, sample_every, span / n_steps


class Trajectory:
    def __init__(
        self,
        dynamics: "SplitDynamics",
        samples: typing.List[TrajectorySample],
        step: float,
    ):
        self.dynamics = dynamics
        self.samples = samples
        self.step = step

    @property
    def problem(self) -> SplitProblem:
        return self.dynamics.problem

    @property
    def params(self) -> DampingParams:
        return self.dynamics.params

    @property
    def lam(self) -> LambdaSchedule:
        return self.dynamics.lam

    @property
    def gam(self) -> GammaSchedule:
        return self.dynamics.gam

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def positions(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])

    def velocities(self) -> np.ndarray:
        return np.array([s.xdot for s in self.samples])

    def norms(self, field: str) -> np.ndarray:
        return np.array([np.linalg.norm(getattr(s, field)) for s in self.samples])

    def final(self) -> TrajectorySample:
        return self.samples[-1]

    def __len__(self):
        return len(self.samples)


class SplitDynamics:
    """Split-DIN-AVD written as the first-order system in z = (x, y).

    xi > 0:  x' = -xi T(x) + (1/xi - alpha/t) x - y/xi,   y' = (1/xi - alpha/t + alpha xi/t^2) x - y/xi
    xi = 0:  x' = y,                                        y' = -(alpha/t) y - T(x)
    with T = T_{lambda(t), gamma(t)}.
    """

    def __init__(
        self,
        params: DampingParams,
        lam: LambdaSchedule,
        gam: GammaSchedule,
        problem: SplitProblem,
        mode: str = "general",
        t_end: typing.Optional[float] = None,
    ):
        report = validate(params, lam, gam, problem.beta, mode, t_end)
        if not report.passed:
            raise ValidationError(report)
        if mode == "b_zero" and not problem.b.is_zero:
            raise ParameterError("b_zero mode needs a problem with B = 0")
        self.params = params
        self.lam = lam
        self.gam = gam
        self.problem = problem
        self.mode = mode

    @property
    def dim(self) -> int:
        return self.problem.dim

    def operator_value(self, t: float, x: np.ndarray) -> np.ndarray:
        return fb_operator_eval(self.problem, self.lam.value(t), self.gam.value(t), x)

    def field(self, t: float, z: np.ndarray) -> np.ndarray:
        dim, alpha, xi = self.dim, self.params.alpha, self.params.xi
        x, y = z[:dim], z[dim:]
        t_op = self.operator_value(t, x)
        if xi == 0:
            return np.concatenate((y, -(alpha / t) * y - t_op))
        coeff = 1.0 / xi - alpha / t
        return np.concatenate(
            (
                -xi * t_op + coeff * x - y / xi,
                (coeff + alpha * xi / (t * t)) * x - y / xi,
            )
        )

    def initial_phase(self, x0, u0) -> PhaseState:
        t0, xi = self.params.t0, self.params.xi
        x0, u0 = as_vector(x0, self.dim), as_vector(u0, self.dim)
        if xi == 0:
            return PhaseState(t0, x0, u0.copy())
        t_op = self.operator_value(t0, x0)
        y0 = -xi * (u0 + xi * t_op - (1.0 / xi - self.params.alpha / t0) * x0)
        return PhaseState(t0, x0, y0)

    def recover_velocity(self, state: PhaseState, t_op: typing.Optional[np.ndarray] = None) -> np.ndarray:
        xi = self.params.xi
        if xi == 0:
            return np.array(state.y, dtype=float)
        if t_op is None:
            t_op = self.operator_value(state.t, state.x)
        return -xi * t_op + (1.0 / xi - self.params.alpha / state.t) * state.x - state.y / xi

    def sample(self, state: PhaseState) -> TrajectorySample:
        lam, gamma = self.lam.value(state.t), self.gam.value(state.t)
        t_op = fb_operator_eval(self.problem, lam, gamma, state.x)
        return TrajectorySample(
            t=state.t,
            x=np.array(state.x, dtype=float),
            xdot=self.recover_velocity(state, t_op),
            t_op=t_op,
            residual=residual_eval(self.problem, gamma, state.x),
            lam=lam,
            gamma=gamma,
        )


def vector_field(
    params: DampingParams,
    lam: LambdaSchedule,
    gam: GammaSchedule,
    p: SplitProblem,
    mode: str = "general",
    t_end: typing.Optional[float] = None,
) -> typing.Callable[[float, np.ndarray], np.ndarray]:
    return SplitDynamics(params, lam, gam, p, mode, t_end).field


def initial_phase(params, lam, gam, p, x0, u0, mode: str = "general", t_end=None) -> PhaseState:
    return SplitDynamics(params, lam, gam, p, mode, t_end).initial_phase(x0, u0)


def recover_velocity(params, lam, gam, p, state: PhaseState, mode: str = "general", t_end=None) -> np.ndarray:
    return SplitDynamics(params, lam, gam, p, mode, t_end).recover_velocity(state)


def _rk4_step(field, t: float, z: np.ndarray, h: float) -> np.ndarray:
    k1 = field(t, z)
    k2 = field(t + h / 2, z + h / 2 * k1)
    k3 = field(t + h / 2, z + h / 2 * k2)
    k4 = field(t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(
    dynamics: SplitDynamics, z0: PhaseState, t_end: float, config: typing.Optional[StepperConfig] = None
) -> Trajectory:
    config = config or StepperConfig()
    t0 = z0.t
    if not t_end > t0:
        raise ParameterError(f"t_end={t_end:g} must exceed t0={t0:g}")
    if z0.x.shape != (dynamics.dim,) or z0.y.shape != (dynamics.dim,):
        raise DimensionError(f"initial state does not match dimension {dynamics.dim}")

    n_steps, sample_every, h = config.grid(t0, t_end)
    dim = dynamics.dim
    _LOGGER.info(
        "integrating %r on [%g, %g]: %d steps of %.3g, sample every %d", dynamics.problem, t0, t_end, n_steps, h,
        sample_every,
    )

    times = np.linspace(t0, t_end, n_steps + 1)
    z = np.concatenate((z0.x, z0.y))
    samples = [dynamics.sample(z0)]
    for i in range(1, n_steps + 1):
        z = _rk4_step(dynamics.field, float(times[i - 1]), z, h)
        t = float(times[i])
        norm = float(np.linalg.norm(z))
        if not math.isfinite(norm) or norm > config.divergence_bound:
            raise DivergenceError(t, norm)
        if i % sample_every == 0:
            samples.append(dynamics.sample(PhaseState(t, z[:dim].copy(), z[dim:].copy())))

    _LOGGER.debug("emitted %d samples", len(samples))
    return Trajectory(dynamics, samples, h)


def free_motion(t: float, t0: float, alpha: float, x0, u0) -> typing.Tuple[np.ndarray, np.ndarray]:
    """x'' + (alpha/t) x' = 0: x(t) = x0 + u0 t0/(alpha-1) (1 - (t0/t)^(alpha-1)), x'(t) = u0 (t0/t)^alpha."""
    x0, u0 = as_vector(x0), as_vector(u0)
    ratio = t0 / t
    return x0 + u0 * t0 / (alpha - 1.0) * (1.0 - ratio ** (alpha - 1.0)), u0 * ratio**alpha


def euler_power_solution(
    t: float, t0: float, alpha: float, m: float, c: float, x0: float, u0: float
) -> typing.Tuple[float, float]:
    """Scalar solution of x'' + (alpha/t) x' + m x/(c t^2) = 0 with x(t0) = x0, x'(t0) = u0.

    Solutions are powers t^r with r^2 + (alpha - 1) r + m/c = 0.
    """
    b = alpha - 1.0
    k = m / c
    disc = b * b - 4.0 * k
    s = math.log(t / t0)
    if disc > 0:
        root = math.sqrt(disc)
        r1, r2 = (-b + root) / 2.0, (-b - root) / 2.0
        c1 = (u0 * t0 - r2 * x0) / (r1 - r2)
        c2 = x0 - c1
        x = c1 * math.exp(r1 * s) + c2 * math.exp(r2 * s)
        xdot = (r1 * c1 * math.exp(r1 * s) + r2 * c2 * math.exp(r2 * s)) / t
        return x, xdot
    a = -b / 2.0
    if disc == 0:
        q = u0 * t0 - a * x0
        x = math.exp(a * s) * (x0 + q * s)
        xdot = math.exp(a * s) * (a * (x0 + q * s) + q) / t
        return x, xdot
    w = math.sqrt(-disc) / 2.0
    q = (u0 * t0 - a * x0) / w
    cos, sin = math.cos(w * s), math.sin(w * s)
    x = math.exp(a * s) * (x0 * cos + q * sin)
    xdot = math.exp(a * s) * (a * (x0 * cos + q * sin) + w * (q * cos - x0 * sin)) / t
    return x, xdot
