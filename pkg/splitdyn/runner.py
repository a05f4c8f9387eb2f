import asyncio
import concurrent.futures
import logging
import time
import typing

import numpy as np
import pandas as pd

from . import diagnostics
from .dynamics import SplitDynamics, StepperConfig, Trajectory, integrate
from .export import iterate_frame, report_path, trajectory_frame, write_csv, write_report
from .operator import cocoercivity_certificate, fb_modulus, fb_operator_eval
from .problem import ProblemLibrary, ProblemSpec
from .schedule import (
    ConstantGamma,
    DampingParams,
    GammaSchedule,
    LambdaSchedule,
    ValidationReport,
    parse_gamma,
    reduce_a_zero,
    validate,
)
from .solver import DiscreteParams, InnerSolverConfig, IterateRun, run
from .utils import (
    ConfigError,
    DivergenceError,
    InnerSolverError,
    ParameterError,
    SplitDynError,
    as_vector,
    resolve_seed,
    sample_pairs,
)

__all__ = [
    "CONFIG_KEYS",
    "PRESETS",
    "METRICS",
    "ExperimentConfig",
    "RunReport",
    "SimulationResult",
    "IterationResult",
    "Comparison",
    "BatchOutcome",
    "exit_code",
    "cmd_simulate",
    "cmd_iterate",
    "cmd_compare",
    "cmd_validate",
    "run_batch",
]

_LOGGER = logging.getLogger(__name__)

CONFIG_KEYS = (
    "problem", "mode", "scheme", "alpha", "xi", "lambda0", "eta", "gamma", "t0", "t_end", "step", "samples",
    "n_iters", "x0", "u0", "x1", "output", "seed", "closed_form", "inner_tol", "inner_max_iters", "epsilon",
    "burn_in", "divergence_bound",
)

PRESETS: typing.Dict[str, typing.Dict[str, typing.Any]] = {
    # ill-conditioned quadratic through the A = 0 reduction
    "5.1": {
        "problem": "quadratic_diag:1,100", "mode": "a_zero", "alpha": 20.0, "eta": 0.278, "xi": 0.0,
        "x0": [1.0, 1.0], "u0": [1.0, 1.0], "t0": 1.0, "t_end": 50.0,
    },
    # B = 0 with fast growing gamma
    "5.2": {
        "problem": "abs", "mode": "b_zero", "alpha": 2.0, "lambda0": 1.1, "xi": 0.0, "gamma": "poly:8",
        "x0": [1.0], "u0": [1.0], "t0": 1.0, "t_end": 50.0,
    },
    # skew rotation plus identity
    "5.3": {
        "problem": "rotation_identity", "mode": "general", "alpha": 7.0, "lambda0": 0.056, "gamma": "const:1.5",
        "xi": 0.0, "x0": [1.0, 2.0], "u0": [-1.0, -1.0], "t0": 1.0, "t_end": 100.0,
    },
    "6": {
        "problem": "rotation_identity", "mode": "general", "scheme": "discrete", "alpha": 7.0, "xi": 0.8,
        "lambda0": 0.15, "gamma": "const:1.5", "n_iters": 1000, "x0": [1.0, 2.0], "x1": [0.0, 1.0],
    },
}

METRICS = ("objective", "envelope_gap", "norm_x", "norm_xdot", "norm_T", "norm_residual", "energy", "oscillations")


def _optional_float(config, key: str) -> typing.Optional[float]:
    value = config.get(key)
    return None if value is None else float(value)


def _vector(value) -> typing.Optional[np.ndarray]:
    if value is None:
        return None
    if isinstance(value, str):
        value = [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
    return as_vector(value)


class ExperimentConfig:
    def __init__(self, config: typing.Dict[str, typing.Any]):
        unknown = sorted(set(config) - set(CONFIG_KEYS))
        if unknown:
            _LOGGER.warning("ignoring unknown config keys: %s", ", ".join(unknown))
        self.config = dict(config)
        try:
            self.problem = str(config["problem"])
            self.alpha = float(config["alpha"])
            self.x0 = _vector(config["x0"])
        except KeyError as err:
            raise ConfigError(f"config key {err} is required") from err
        self.mode = str(config.get("mode", "general"))
        self.scheme = str(config.get("scheme", "continuous"))
        if self.scheme not in ("continuous", "discrete"):
            raise ConfigError(f"scheme should be continuous or discrete, got `{self.scheme}`")
        self.xi = float(config.get("xi", 0.0))
        self.lambda0 = _optional_float(config, "lambda0")
        self.eta = _optional_float(config, "eta")
        self.gamma = config.get("gamma")
        self.t0 = float(config.get("t0", 1.0))
        self.t_end = float(config.get("t_end", 50.0))
        self.samples = int(config.get("samples", 500))
        self.n_iters = int(config.get("n_iters", 1000))
        self.u0 = _vector(config.get("u0"))
        self.x1 = _vector(config.get("x1"))
        self.output = config.get("output")
        self.seed = resolve_seed(config.get("seed"))
        self.closed_form = config.get("closed_form")
        self.epsilon = _optional_float(config, "epsilon")
        self.burn_in = float(config.get("burn_in", 0.2))
        self.stepper = StepperConfig(config)
        self.inner = InnerSolverConfig(config)

    @classmethod
    def from_preset(cls, name: str, overrides: typing.Optional[typing.Dict[str, typing.Any]] = None):
        if name not in PRESETS:
            raise ConfigError(f"unknown preset `{name}`, expected one of {', '.join(PRESETS)}")
        return cls({**PRESETS[name], **(overrides or {})})

    def replace(self, **overrides) -> "ExperimentConfig":
        return ExperimentConfig({**self.config, **overrides})

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return {key: self.config[key] for key in CONFIG_KEYS if self.config.get(key) is not None}

    def build_problem(self, library: typing.Optional[ProblemLibrary] = None) -> ProblemSpec:
        return (library or ProblemLibrary()).build(self.problem)

    def schedules(self, spec: ProblemSpec) -> typing.Tuple[DampingParams, LambdaSchedule, GammaSchedule]:
        params = DampingParams(self.alpha, self.xi, self.t0)
        if self.mode == "a_zero" and self.eta is not None:
            lambda0, c = reduce_a_zero(self.eta, spec.problem.beta, self.alpha)
            return params, LambdaSchedule(lambda0), ConstantGamma(c)
        if self.lambda0 is None:
            raise ConfigError("config key 'lambda0' is required (or 'eta' in a_zero mode)")
        if self.gamma is None:
            raise ConfigError("config key 'gamma' is required")
        return params, LambdaSchedule(self.lambda0), parse_gamma(self.gamma, self.lambda0)

    def discrete_params(self, spec: ProblemSpec) -> DiscreteParams:
        _, lam, gam = self.schedules(spec)
        return DiscreteParams(self.alpha, self.xi, lam.lambda0, gam, self.n_iters)

    @property
    def solver_mode(self) -> str:
        return "b_zero" if self.mode == "b_zero" else "general"

    def __repr__(self):
        return f"ExperimentConfig({self.as_dict()})"


class RunReport(typing.NamedTuple):
    config: typing.Dict[str, typing.Any]
    fits: typing.Dict[str, typing.Optional[diagnostics.RateFit]]
    energy_onset: typing.Optional[float]
    dissipation: typing.Optional[diagnostics.DissipationReport]
    final_distance: float
    wall_time: float
    extra: typing.Dict[str, typing.Any]

    def as_dict(self) -> typing.Dict[str, typing.Any]:
        return {
            "config": self.config,
            "fits": {name: (fit._asdict() if fit else None) for name, fit in self.fits.items()},
            "energy_onset": self.energy_onset,
            "dissipation": self.dissipation._asdict() if self.dissipation else None,
            "final_distance": self.final_distance,
            "wall_time": self.wall_time,
            **self.extra,
        }


class SimulationResult(typing.NamedTuple):
    spec: ProblemSpec
    trajectory: Trajectory
    energies: np.ndarray
    report: RunReport


class IterationResult(typing.NamedTuple):
    spec: ProblemSpec
    run: IterateRun
    report: RunReport


class Comparison(typing.NamedTuple):
    metric: str
    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    summary: typing.Dict[str, typing.Any]

    def ratio_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.left) / np.interp(t, self.times, self.right))

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "left": self.left, "right": self.right})


class BatchOutcome(typing.NamedTuple):
    result: typing.Any
    code: int


def exit_code(error: BaseException) -> int:
    if isinstance(error, InnerSolverError):
        return 4
    if isinstance(error, DivergenceError):
        return 3
    return 2


def _try_fit(name: str, times, values, envelope: bool = True) -> typing.Optional[diagnostics.RateFit]:
    try:
        return diagnostics.rate_fit(times, values, envelope=envelope)
    except ParameterError as err:
        _LOGGER.warning("no rate fit for %s: %s", name, err)
        return None


def _metric_series(spec: ProblemSpec, traj: Trajectory, energies: np.ndarray, metric: str) -> np.ndarray:
    if metric in ("objective", "envelope_gap"):
        if spec.objective is None:
            raise ConfigError(f"problem `{spec.name}` has no function values for metric `{metric}`")
        if metric == "objective":
            return diagnostics.objective_series(traj, spec.objective, spec.objective.min_value)
        if not spec.problem.b.is_zero:
            raise ConfigError("envelope_gap needs a problem with B = 0")
        return diagnostics.envelope_gap_series(traj, spec.objective)
    if metric == "norm_x":
        return np.linalg.norm(traj.positions(), axis=1)
    if metric == "norm_xdot":
        return traj.norms("xdot")
    if metric == "norm_T":
        return traj.norms("t_op")
    if metric == "norm_residual":
        return traj.norms("residual")
    if metric == "energy":
        return energies
    if metric == "oscillations":
        return traj.velocities()[:, -1]
    raise ConfigError(f"unknown metric `{metric}`, expected one of {', '.join(METRICS)}")


def simulate(config: ExperimentConfig, library: typing.Optional[ProblemLibrary] = None):
    spec = config.build_problem(library)
    params, lam, gam = config.schedules(spec)
    dynamics = SplitDynamics(params, lam, gam, spec.problem, config.mode, config.t_end)
    u0 = config.u0 if config.u0 is not None else np.zeros(spec.dim)
    traj = integrate(dynamics, dynamics.initial_phase(config.x0, u0), config.t_end, config.stepper)
    energies, _ = diagnostics.energy_series(traj)
    return spec, traj, energies


def cmd_simulate(config: ExperimentConfig, library: typing.Optional[ProblemLibrary] = None) -> SimulationResult:
    started = time.perf_counter()
    spec, traj, energies = simulate(config, library)
    times = traj.times()

    objective = None
    fits = {
        "speed": _try_fit("speed", times, traj.norms("xdot")),
        "T": _try_fit("T", times, traj.norms("t_op")),
        "residual": _try_fit("residual", times, traj.norms("residual")),
    }
    if spec.objective is not None:
        objective = _metric_series(spec, traj, energies, "objective")
        fits["objective"] = _try_fit("objective", times, objective)
        if spec.problem.b.is_zero:
            fits["envelope_gap"] = _try_fit(
                "envelope_gap", times, _metric_series(spec, traj, energies, "envelope_gap")
            )

    energy_onset = diagnostics.monotone_onset(energies, 1e-7 * energies[0])
    try:
        dissipation: typing.Optional[diagnostics.DissipationReport] = diagnostics.dissipation_check(
            traj, epsilon=config.epsilon, burn_in=config.burn_in
        )
    except ParameterError as err:
        _LOGGER.warning("dissipation check skipped: %s", err)
        dissipation = None

    extra: typing.Dict[str, typing.Any] = {
        "integrals": diagnostics.integral_estimates(traj).partials if len(traj) >= 50 else None,
        "oscillations": [diagnostics.sign_changes(traj.velocities()[:, i]) for i in range(spec.dim)],
    }
    distance = diagnostics.distance_report(traj)
    report = RunReport(
        config.as_dict(),
        fits,
        float(times[energy_onset]),
        dissipation,
        distance.final,
        time.perf_counter() - started,
        extra,
    )
    if config.output:
        write_csv(config.output, trajectory_frame(traj, energies, objective))
        write_report(report_path(config.output), report.as_dict())
    _LOGGER.info("simulated %s in %.2fs", spec.name, report.wall_time)
    return SimulationResult(spec, traj, energies, report)


def _boundedness(values: np.ndarray, ks: np.ndarray, start: int = 100) -> typing.Optional[float]:
    """max over k >= start of the series divided by its value at k = start."""
    index = np.nonzero(ks == start)[0]
    if index.size == 0 or values[index[0]] == 0:
        return None
    return float(np.max(values[index[0]:]) / values[index[0]])


def cmd_iterate(config: ExperimentConfig, library: typing.Optional[ProblemLibrary] = None) -> IterationResult:
    started = time.perf_counter()
    spec = config.build_problem(library)
    params = config.discrete_params(spec)
    x1 = config.x1 if config.x1 is not None else config.x0
    iterates = run(spec.problem, params, config.x0, x1, config.solver_mode, config.closed_form, config.inner)

    ks = iterates.ks()
    extra: typing.Dict[str, typing.Any] = {
        "max_backward_residual": float(np.max(iterates.series("backward_residual"))),
        "dx_boundedness": _boundedness(iterates.series("norm_dx_times_k"), ks),
        "xy_boundedness": _boundedness(iterates.series("norm_xy_times_k"), ks),
    }
    if spec.problem.b.is_zero:
        other = run(
            spec.problem, params, config.x0, x1, config.solver_mode,
            None if config.closed_form else "exact", config.inner,
        )
        extra["closed_form_agreement"] = float(np.max(np.abs(other.positions() - iterates.positions())))

    distance = float(np.linalg.norm(iterates.final().x - spec.known_zero))
    report = RunReport(config.as_dict(), {}, None, None, distance, time.perf_counter() - started, extra)
    if config.output:
        write_csv(config.output, iterate_frame(iterates))
        write_report(report_path(config.output), report.as_dict())
    _LOGGER.info("iterated %s in %.2fs", spec.name, report.wall_time)
    return IterationResult(spec, iterates, report)


def cmd_compare(
    left: ExperimentConfig,
    right: ExperimentConfig,
    metric: str,
    library: typing.Optional[ProblemLibrary] = None,
) -> Comparison:
    if metric not in METRICS:
        raise ConfigError(f"unknown metric `{metric}`, expected one of {', '.join(METRICS)}")
    if left.problem != right.problem:
        raise ConfigError(f"cannot compare different problems `{left.problem}` and `{right.problem}`")
    library = library or ProblemLibrary()
    spec_l, traj_l, energies_l = simulate(left, library)
    spec_r, traj_r, energies_r = simulate(right, library)
    times = traj_l.times()
    series_l = _metric_series(spec_l, traj_l, energies_l, metric)
    series_r = np.interp(times, traj_r.times(), _metric_series(spec_r, traj_r, energies_r, metric))

    summary: typing.Dict[str, typing.Any] = {"t_end": float(times[-1])}
    if metric == "oscillations":
        summary["left_sign_changes"] = diagnostics.sign_changes(series_l)
        summary["right_sign_changes"] = diagnostics.sign_changes(series_r)
    else:
        summary["ratio_at_end"] = float(series_l[-1] / series_r[-1]) if series_r[-1] != 0 else None
    comparison = Comparison(metric, times, series_l, series_r, summary)
    if left.output:
        write_csv(left.output, comparison.frame())
        write_report(report_path(left.output), summary)
    return comparison


def cmd_validate(config: ExperimentConfig, library: typing.Optional[ProblemLibrary] = None) -> ValidationReport:
    spec = config.build_problem(library)
    if config.scheme == "discrete":
        return config.discrete_params(spec).validate(spec.problem.beta, config.solver_mode)

    params, lam, gam = config.schedules(spec)
    report = validate(params, lam, gam, spec.problem.beta, config.mode, config.t_end)
    if report.passed:
        lam_0, gamma_0 = lam.value(params.t0), gam.value(params.t0)
        modulus = fb_modulus(lam_0, gamma_0, spec.problem.beta)
        certificate = cocoercivity_certificate(
            lambda x: fb_operator_eval(spec.problem, lam_0, gamma_0, x),
            modulus,
            sample_pairs(spec.dim, 200, config.seed),
        )
        report.notes.append(
            f"T at t0 is {modulus:.6g}-cocoercive on 200 samples: margin {certificate.margin:.3g} "
            f"({'ok' if certificate.passed else 'FAILED'})"
        )
    return report


def _guard(job: typing.Callable[[], typing.Any]) -> BatchOutcome:
    try:
        return BatchOutcome(job(), 0)
    except (SplitDynError, ValueError) as err:
        logging.exception("batch job failed")
        return BatchOutcome(err, exit_code(err))


async def _gather(jobs, workers: int) -> typing.List[BatchOutcome]:
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(await asyncio.gather(*(loop.run_in_executor(pool, _guard, job) for job in jobs)))


def run_batch(jobs: typing.Sequence[typing.Callable[[], typing.Any]], workers: int = 1) -> typing.List[BatchOutcome]:
    if workers < 1:
        raise ParameterError(f"jobs must be positive, got {workers}")
    return asyncio.run(_gather(list(jobs), workers))
