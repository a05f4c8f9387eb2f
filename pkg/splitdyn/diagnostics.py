import logging
import math
import typing

import numpy as np

from .dynamics import Trajectory, TrajectorySample
from .problem import Objective
from .schedule import DampingParams
from .utils import ParameterError, as_vector

__all__ = [
    "EnergyRecord",
    "RateFit",
    "DissipationReport",
    "IntegralReport",
    "DerivativeEnvelopes",
    "DistanceReport",
    "resolve_anchor",
    "lyapunov_energy",
    "energy_series",
    "monotone_onset",
    "epsilon_default",
    "dissipation_check",
    "suffix_max",
    "rate_fit",
    "integral_estimates",
    "prox_points",
    "objective_series",
    "envelope_gap_series",
    "objective_certificate",
    "derivative_envelopes",
    "distance_report",
    "sign_changes",
]

_LOGGER = logging.getLogger(__name__)

ObjectiveFn = typing.Callable[[np.ndarray], float]


class EnergyRecord(typing.NamedTuple):
    t: float
    energy: float
    anchor: np.ndarray


class RateFit(typing.NamedTuple):
    slope: float
    intercept: float
    window: typing.Tuple[float, float]
    residual_r2: float
    points: int
    dropped: int


class DissipationReport(typing.NamedTuple):
    max_lhs: float
    t_at_max: float
    onset_time: typing.Optional[float]
    epsilon: float
    burn_in: float
    tol: float
    anchor_approximate: bool

    @property
    def passed(self) -> bool:
        return self.max_lhs <= self.tol


class IntegralReport(typing.NamedTuple):
    partials: typing.Dict[str, typing.List[float]]

    def total(self, name: str) -> float:
        return self.partials[name][-1]

    def last_quartile_fraction(self, name: str) -> float:
        parts = self.partials[name]
        if parts[-1] == 0:
            return 0.0
        return (parts[-1] - parts[-2]) / parts[-1]


class DerivativeEnvelopes(typing.NamedTuple):
    measured: RateFit
    first_envelope: RateFit
    second_envelope: typing.Optional[RateFit]


class DistanceReport(typing.NamedTuple):
    initial: float
    final: float
    decreasing_from: typing.Optional[float]
    anchor_approximate: bool


def resolve_anchor(traj: Trajectory, anchor=None) -> typing.Tuple[np.ndarray, bool]:
    if anchor is not None:
        return as_vector(anchor, traj.problem.dim), False
    if traj.problem.known_zero is not None:
        return traj.problem.known_zero, False
    _LOGGER.warning("no known zero for %r: using the final trajectory point as anchor", traj.problem)
    return np.array(traj.final().x, dtype=float), True


def lyapunov_energy(sample: TrajectorySample, anchor, params: DampingParams) -> EnergyRecord:
    """1/2 |(alpha-1)/2 (x - anchor) + t (x' + xi T(x))|^2 + (alpha-1)^2/8 |x - anchor|^2."""
    if anchor is None:
        raise ParameterError("lyapunov_energy needs an anchor in zer(A+B): pass the problem's known zero")
    anchor = as_vector(anchor, sample.x.shape[0])
    half_gap = (params.alpha - 1.0) / 2.0
    offset = sample.x - anchor
    kinetic = half_gap * offset + sample.t * (sample.xdot + params.xi * sample.t_op)
    energy = 0.5 * float(np.dot(kinetic, kinetic)) + half_gap**2 / 2.0 * float(np.dot(offset, offset))
    return EnergyRecord(sample.t, energy, anchor)


def energy_series(traj: Trajectory, anchor=None) -> typing.Tuple[np.ndarray, bool]:
    anchor, approximate = resolve_anchor(traj, anchor)
    energies = np.array([lyapunov_energy(s, anchor, traj.params).energy for s in traj.samples])
    return energies, approximate


def monotone_onset(values, tol: float = 0.0) -> int:
    """Smallest index after which the series never increases by more than tol per step."""
    values = np.asarray(values, dtype=float)
    increases = np.nonzero(np.diff(values) > tol)[0]
    if increases.size == 0:
        return 0
    return int(increases[-1]) + 1


def _modulus_rate(lambda0: float, mode: str, beta: typing.Optional[float], gamma: typing.Optional[float]) -> float:
    """m with T at least m t^2-cocoercive: lambda0/2 in general, lambda0 when B = 0, eta beta when A = 0."""
    if mode == "b_zero":
        return lambda0
    if mode == "a_zero":
        if beta is None or gamma is None:
            raise ParameterError("a_zero epsilon needs the cocoercivity constant and the constant gamma")
        return lambda0 * beta / gamma
    return lambda0 / 2.0


def _epsilon_ceiling(
    alpha: float, lambda0: float, mode: str, beta: typing.Optional[float] = None, gamma: typing.Optional[float] = None
) -> float:
    """alpha - 1 - sqrt(1/m) for the modulus rate m of T."""
    rate = _modulus_rate(lambda0, mode, beta, gamma)
    if not alpha > 1 or not rate > 1.0 / (alpha - 1.0) ** 2:
        raise ParameterError(
            f"epsilon needs a modulus rate above 1/(alpha-1)^2 = {1.0 / max(alpha - 1.0, 1e-300) ** 2:.6g} "
            f"(alpha={alpha:g}, lambda0={lambda0:g}, mode {mode}, rate={rate:g})"
        )
    return alpha - 1.0 - math.sqrt(1.0 / rate)


def epsilon_default(
    alpha: float,
    lambda0: float,
    mode: str = "general",
    beta: typing.Optional[float] = None,
    gamma: typing.Optional[float] = None,
) -> float:
    return _epsilon_ceiling(alpha, lambda0, mode, beta, gamma) / 2.0


def dissipation_check(
    traj: Trajectory,
    anchor=None,
    epsilon: typing.Optional[float] = None,
    burn_in: float = 0.2,
    tol: typing.Optional[float] = None,
) -> DissipationReport:
    """Max over samples past burn-in of E' + (eps/2) t |x'|^2 + (eps/4) t lambda(t) |T(x)|^2.

    E' is taken by centered differences on the sample grid. ``tol`` defaults to 1e-6 E(t0).
    """
    t0 = traj.samples[0].t
    ceiling = _epsilon_ceiling(
        traj.params.alpha, traj.lam.lambda0, traj.dynamics.mode, traj.problem.beta, traj.gam.value(t0)
    )
    if epsilon is None:
        epsilon = ceiling / 2.0
    if not 0 < epsilon < ceiling:
        raise ParameterError(f"epsilon={epsilon:g} outside (0, {ceiling:.6g}) for mode {traj.dynamics.mode}")

    times = traj.times()
    energies, approximate = energy_series(traj, anchor)
    if tol is None:
        tol = 1e-6 * energies[0]
    energy_rate = np.gradient(energies, times)
    speeds = traj.norms("xdot")
    t_ops = traj.norms("t_op")
    lams = np.array([s.lam for s in traj.samples])
    lhs = energy_rate + epsilon / 2.0 * times * speeds**2 + epsilon / 4.0 * times * lams * t_ops**2

    start = int(math.floor(burn_in * len(times)))
    tail = lhs[start:]
    worst = int(np.argmax(tail)) + start
    violations = np.nonzero(lhs > tol)[0]
    if violations.size == 0:
        onset: typing.Optional[float] = float(times[0])
    elif violations[-1] + 1 < len(times):
        onset = float(times[violations[-1] + 1])
    else:
        onset = None
    return DissipationReport(float(lhs[worst]), float(times[worst]), onset, epsilon, burn_in, tol, approximate)


def suffix_max(values) -> np.ndarray:
    """v*(t_i) = max_{j >= i} v(t_j), the smallest nonincreasing majorant of the series."""
    values = np.asarray(values, dtype=float)
    return np.maximum.accumulate(values[::-1])[::-1]


def rate_fit(times, values, window: float = 0.5, envelope: bool = False, min_points: int = 10) -> RateFit:
    """Least-squares line through (log t, log v) over the trailing ``window`` of the horizon in log-time.

    With ``envelope`` the fit runs on the suffix maximum, which bounds oscillating series from above.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ParameterError("times and values differ in length")
    if envelope:
        values = suffix_max(values)
    if not 0 < window <= 1:
        raise ParameterError(f"window fraction must lie in (0, 1], got {window}")

    log_first, log_last = math.log(times[0]), math.log(times[-1])
    t_lo = math.exp(log_last - window * (log_last - log_first))
    in_window = times >= t_lo * (1 - 1e-12)
    positive = in_window & (values > 0)
    dropped = int(np.count_nonzero(in_window & ~positive))
    if dropped:
        _LOGGER.warning("rate fit dropped %d nonpositive values", dropped)
    if np.count_nonzero(positive) < min_points:
        raise ParameterError(f"rate fit needs {min_points} positive points, got {np.count_nonzero(positive)}")

    log_t = np.log(times[positive])
    log_v = np.log(values[positive])
    slope, intercept = np.polyfit(log_t, log_v, 1)
    fitted = slope * log_t + intercept
    ss_res = float(np.sum((log_v - fitted) ** 2))
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    kept = times[positive]
    return RateFit(float(slope), float(intercept), (float(kept[0]), float(kept[-1])), r2, int(kept.size), dropped)


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    pieces = _trapezoid(np.stack((values[:-1], values[1:])), x=np.stack((times[:-1], times[1:])), axis=0)
    return np.concatenate(([0.0], np.cumsum(pieces)))


def integral_estimates(traj: Trajectory) -> IntegralReport:
    """int t|x'|^2, int t^3 |x''|^2 and int gamma^2/t |residual|^2, with x'' from differencing x'."""
    if len(traj) < 50:
        raise ParameterError(f"integral estimates need at least 50 samples, got {len(traj)}")
    times = traj.times()
    velocities = traj.velocities()
    accelerations = np.gradient(velocities, times, axis=0, edge_order=2)
    gammas = np.array([s.gamma for s in traj.samples])
    integrands = {
        "speed": times * np.sum(velocities**2, axis=1),
        "acceleration": times**3 * np.sum(accelerations**2, axis=1),
        "residual": gammas**2 / times * traj.norms("residual") ** 2,
    }
    marks = [times[0] + q * (times[-1] - times[0]) for q in (0.25, 0.5, 0.75)]
    indices = [min(int(np.searchsorted(times, m, side="right")) - 1, len(times) - 1) for m in marks]
    indices.append(len(times) - 1)
    partials = {}
    for name, integrand in integrands.items():
        cumulative = _cumulative_trapezoid(times, integrand)
        partials[name] = [float(cumulative[i]) for i in indices]
    return IntegralReport(partials)


def prox_points(traj: Trajectory) -> np.ndarray:
    """prox_{gamma(t) f}(x - gamma(t) grad g(x)) = J_{gamma A}(x - gamma B x) at every sample."""
    problem = traj.problem
    points = []
    for s in traj.samples:
        u = s.x if problem.b.is_zero else s.x - s.gamma * problem.b(s.x)
        points.append(problem.a.resolvent(s.gamma, u))
    return np.array(points)


def objective_series(traj: Trajectory, objective: ObjectiveFn, min_value: float) -> np.ndarray:
    """(f + g)(prox point) - min(f + g) per sample."""
    return np.array([objective(p) - min_value for p in prox_points(traj)])


def envelope_gap_series(traj: Trajectory, objective: Objective) -> np.ndarray:
    """Moreau envelope gap f_gamma(x) - min f for g = 0.

    Uses the objective's closed-form envelope when it has one, else f(p) + |p - x|^2 / (2 gamma) at the prox point.
    """
    if objective.envelope is not None:
        values = [objective.envelope(s.gamma, s.x) for s in traj.samples]
    else:
        values = [
            objective.f(p) + float(np.dot(p - s.x, p - s.x)) / (2.0 * s.gamma)
            for s, p in zip(traj.samples, prox_points(traj))
        ]
    return np.array(values) - objective.min_value


def objective_certificate(traj: Trajectory, objective: ObjectiveFn, min_value: float, anchor=None) -> float:
    """Max over samples of (f+g)(prox) - min - (lambda/gamma) |T(x)| |x - anchor|; nonpositive when it holds."""
    anchor, _ = resolve_anchor(traj, anchor)
    gaps = objective_series(traj, objective, min_value)
    bounds = np.array(
        [s.lam / s.gamma * np.linalg.norm(s.t_op) * np.linalg.norm(s.x - anchor) for s in traj.samples]
    )
    return float(np.max(gaps - bounds))


def derivative_envelopes(traj: Trajectory, window: float = 0.5) -> DerivativeEnvelopes:
    """Measured decay of |d/dt residual| next to the two candidate envelopes 1/(t gamma) and
    t^2 |d/dt (gamma/lambda)| / gamma^2. Neither is asserted to dominate."""
    times = traj.times()
    residuals = np.array([s.residual for s in traj.samples])
    derivative = np.linalg.norm(np.gradient(residuals, times, axis=0), axis=1)
    gammas = np.array([s.gamma for s in traj.samples])
    lams = np.array([s.lam for s in traj.samples])
    gamma_dots = np.array([traj.gam.derivative(t) for t in times])
    lam_dots = np.array([traj.lam.derivative(t) for t in times])
    ratio_dot = np.abs((gamma_dots * lams - gammas * lam_dots) / lams**2)
    second = times**2 * ratio_dot / gammas**2
    measured = rate_fit(times, derivative, window, envelope=True)
    first_fit = rate_fit(times, 1.0 / (times * gammas), window)
    second_fit = rate_fit(times, second, window) if np.count_nonzero(second > 0) >= 10 else None
    return DerivativeEnvelopes(measured, first_fit, second_fit)


def distance_report(traj: Trajectory, anchor=None, tol: float = 0.0) -> DistanceReport:
    anchor, approximate = resolve_anchor(traj, anchor)
    distances = np.linalg.norm(traj.positions() - anchor, axis=1)
    onset = monotone_onset(distances, tol)
    decreasing_from = float(traj.times()[onset]) if onset < len(distances) - 1 else None
    return DistanceReport(float(distances[0]), float(distances[-1]), decreasing_from, approximate)


def sign_changes(values) -> int:
    signs = np.sign(np.asarray(values, dtype=float))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
