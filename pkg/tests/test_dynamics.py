import numpy as np
import pytest

from splitdyn.dynamics import (
    PhaseState,
    SplitDynamics,
    StepperConfig,
    euler_power_solution,
    free_motion,
    initial_phase,
    integrate,
    recover_velocity,
    vector_field,
)
from splitdyn.schedule import ConstantGamma, DampingParams, LambdaSchedule, PolynomialGamma
from splitdyn.utils import DivergenceError, ParameterError, ValidationError

X0 = np.array([1.0, -2.0])
U0 = np.array([0.5, 1.0])


def _free_dynamics(library, xi=0.0, alpha=3.0):
    return SplitDynamics(
        DampingParams(alpha, xi, 1.0), LambdaSchedule(1.0), ConstantGamma(1.0), library.build("zero:2").problem
    )


def _final_error(dynamics, step):
    traj = integrate(dynamics, dynamics.initial_phase(X0, U0), 10.0, StepperConfig({"step": step}))
    final = traj.final()
    exact, _ = free_motion(final.t, 1.0, dynamics.params.alpha, X0, U0)
    return float(np.linalg.norm(final.x - exact))


def test_fourth_order_convergence(library):
    dynamics = _free_dynamics(library)
    ratio = _final_error(dynamics, 0.1) / _final_error(dynamics, 0.05)
    assert 16.0 * 0.8 <= ratio <= 16.0 * 1.2


@pytest.mark.parametrize("xi", [0.0, 0.5])
def test_matches_free_motion(library, xi):
    dynamics = _free_dynamics(library, xi)
    traj = integrate(dynamics, dynamics.initial_phase(X0, U0), 10.0, StepperConfig({"step": 1e-3}))
    for sample in traj.samples[:: len(traj) // 10]:
        x, xdot = free_motion(sample.t, 1.0, 3.0, X0, U0)
        np.testing.assert_allclose(sample.x, x, atol=1e-8)
        np.testing.assert_allclose(sample.xdot, xdot, atol=1e-8)


def test_velocity_recovered_from_phase(library):
    spec = library.build("rotation_identity")
    dynamics = SplitDynamics(DampingParams(7.0, 0.8, 1.0), LambdaSchedule(0.056), ConstantGamma(1.5), spec.problem)
    state = dynamics.initial_phase([1.0, 2.0], [-1.0, -1.0])
    np.testing.assert_allclose(dynamics.recover_velocity(state), [-1.0, -1.0], atol=1e-12)


@pytest.mark.parametrize("xi", [0.0, 0.8])
def test_zero_is_stationary(library, xi):
    spec = library.build("rotation_identity")
    dynamics = SplitDynamics(DampingParams(7.0, xi, 1.0), LambdaSchedule(0.056), ConstantGamma(1.5), spec.problem)
    state = dynamics.initial_phase([0.0, 0.0], [0.0, 0.0])
    np.testing.assert_array_equal(dynamics.field(2.0, np.concatenate((state.x, state.y))), np.zeros(4))


def test_any_point_is_stationary_without_operators(library):
    dynamics = _free_dynamics(library, xi=0.3)
    traj = integrate(dynamics, dynamics.initial_phase([3.0, -1.0], [0.0, 0.0]), 5.0)
    np.testing.assert_allclose(traj.positions(), np.tile([3.0, -1.0], (len(traj), 1)), atol=1e-8)


def test_rejects_invalid_parameters(library):
    spec = library.build("rotation_identity")
    with pytest.raises(ValidationError, match="alpha > 1"):
        SplitDynamics(DampingParams(1.0), LambdaSchedule(1.0), ConstantGamma(1.5), spec.problem)
    with pytest.raises(ParameterError):
        SplitDynamics(DampingParams(3.0), LambdaSchedule(2.0), PolynomialGamma(1.0, 1.0), spec.problem, "b_zero")


def test_divergence_guard(library):
    dynamics = _free_dynamics(library)
    with pytest.raises(DivergenceError):
        integrate(dynamics, dynamics.initial_phase(X0, U0), 2.0, StepperConfig({"divergence_bound": 1e-3}))


def test_bad_horizon(library):
    dynamics = _free_dynamics(library)
    with pytest.raises(ParameterError):
        integrate(dynamics, PhaseState(1.0, X0, U0), 1.0)


def test_sampling_grid():
    assert StepperConfig({"step": 0.1}).grid(1.0, 10.0) == (90, 1, pytest.approx(0.1))
    n_steps, every, step = StepperConfig({"samples": 11}).grid(0.0, 10.0)
    assert n_steps == 10 * every
    assert step == pytest.approx(10.0 / n_steps)
    for t_end in (10.0, 50.0, 100.0):
        n_steps, every, _ = StepperConfig().grid(1.0, t_end)
        assert n_steps // every + 1 == 500


def test_samples_on_requested_grid(library):
    dynamics = _free_dynamics(library)
    traj = integrate(dynamics, dynamics.initial_phase(X0, U0), 50.0)
    assert len(traj) == 500
    np.testing.assert_allclose(traj.times(), np.linspace(1.0, 50.0, 500), rtol=0, atol=1e-12)


def test_euler_oracle_satisfies_initial_data():
    for m in (1.0, 100.0, 90.25):
        x, xdot = euler_power_solution(1.0, 1.0, 20.0, m, 1.0, 1.0, 1.0)
        assert x == pytest.approx(1.0)
        assert xdot == pytest.approx(1.0)


def test_diagonal_quadratic_follows_euler_solution(library):
    # A = 0 gives T = B x / (eta t^2), so each coordinate solves an Euler equation
    spec = library.build("quadratic_diag:1,100")
    lambda0, gamma = 0.278 * 0.01998, 0.01998
    dynamics = SplitDynamics(DampingParams(20.0), LambdaSchedule(lambda0), ConstantGamma(gamma), spec.problem, "a_zero")
    traj = integrate(dynamics, dynamics.initial_phase([1.0, 1.0], [1.0, 1.0]), 50.0, StepperConfig({"step": 2e-3}))
    for sample in traj.samples[::50]:
        for i, m in enumerate((1.0, 100.0)):
            x, xdot = euler_power_solution(sample.t, 1.0, 20.0, m, lambda0 / gamma, 1.0, 1.0)
            assert sample.x[i] == pytest.approx(x, abs=1e-6)
            assert sample.xdot[i] == pytest.approx(xdot, abs=1e-6)


def _rotation(library, xi):
    spec = library.build("rotation_identity")
    return SplitDynamics(DampingParams(7.0, xi), LambdaSchedule(0.056), ConstantGamma(1.5), spec.problem)


def test_step_halving_is_self_consistent(library):
    dynamics = _rotation(library, 0.0)
    finals = []
    for step in (0.01, 0.005):
        state = dynamics.initial_phase([1.0, 2.0], [-1.0, -1.0])
        traj = integrate(dynamics, state, 100.0, StepperConfig({"step": step}))
        finals.append(traj.final().x)
    assert np.linalg.norm(finals[0] - finals[1]) <= 1e-6


@pytest.mark.parametrize("xi", [0.0, 0.8])
def test_sampled_residual_is_scaled_operator(library, xi):
    dynamics = _rotation(library, xi)
    traj = integrate(dynamics, dynamics.initial_phase([1.0, 2.0], [-1.0, -1.0]), 20.0)
    for sample in traj.samples:
        np.testing.assert_allclose(sample.residual, sample.lam / sample.gamma * sample.t_op, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("xi", [0.0, 0.8])
def test_equilibrium_stays_put(library, xi):
    dynamics = _rotation(library, xi)
    traj = integrate(dynamics, dynamics.initial_phase([0.0, 0.0], [0.0, 0.0]), 10.0)
    assert np.max(np.abs(traj.positions())) <= 1e-10
    assert np.max(np.abs(traj.velocities())) <= 1e-10


def test_field_matches_finite_differences(library):
    dynamics = _rotation(library, 0.8)
    h = 1e-5
    state = dynamics.initial_phase([1.0, 2.0], [-1.0, -1.0])
    traj = integrate(dynamics, state, 1.0 + 2 * h, StepperConfig({"step": h, "samples": 3}))
    assert len(traj) == 3

    def phase(sample):
        # inverse of recover_velocity
        coeff = 1.0 / 0.8 - 7.0 / sample.t
        y = -0.8 * (sample.xdot + 0.8 * sample.t_op - coeff * sample.x)
        return np.concatenate((sample.x, y))

    first, middle, last = traj.samples
    difference = (phase(last) - phase(first)) / (last.t - first.t)
    np.testing.assert_allclose(dynamics.field(middle.t, phase(middle)), difference, atol=1e-6)
    np.testing.assert_allclose(middle.xdot, difference[:2], atol=1e-6)


def test_module_level_wrappers(library):
    spec = library.build("quadratic_diag:1")
    params, lam, gam = DampingParams(3.0, 0.5), LambdaSchedule(1.0), PolynomialGamma(0.1, 1.0)
    with pytest.raises(ValidationError):
        vector_field(params, lam, gam, spec.problem)
    field = vector_field(params, lam, gam, spec.problem, t_end=5.0)
    dynamics = SplitDynamics(params, lam, gam, spec.problem, t_end=5.0)
    z = np.array([0.7, -0.2])
    np.testing.assert_array_equal(field(2.0, z), dynamics.field(2.0, z))

    state = initial_phase(params, lam, gam, spec.problem, [1.0], [0.5], t_end=5.0)
    np.testing.assert_array_equal(state.y, dynamics.initial_phase([1.0], [0.5]).y)
    np.testing.assert_allclose(recover_velocity(params, lam, gam, spec.problem, state, t_end=5.0), [0.5], atol=1e-12)
