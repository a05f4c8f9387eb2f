import math

import numpy as np
import pytest

from splitdyn.operator import SplitProblem, diagonal_cocoercive, fb_operator_eval, zero_operator
from splitdyn.schedule import ConstantGamma, PolynomialGamma, parse_gamma
from splitdyn.solver import (
    DiscreteParams,
    InnerSolverConfig,
    IterateState,
    b_zero_step,
    backward_resolve,
    extrapolate,
    initial_state,
    run,
    step,
)
from splitdyn.utils import InnerSolverError, ParameterError, ValidationError


def _state(k, x_prev, x_curr, t_prev, t_curr):
    return IterateState(k, *(np.asarray(v, dtype=float) for v in (x_prev, x_curr, t_prev, t_curr)))


def test_extrapolation_vanishes_at_k_equal_alpha():
    params = DiscreteParams(2.0, 0.0, 1.0, ConstantGamma(1.0), 10)
    y = extrapolate(_state(2, [1.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.0, 0.0]), params)
    np.testing.assert_array_equal(y, [2.0, 0.0])


def test_extrapolation_formula():
    rng = np.random.default_rng(0)
    x_prev, x_curr, t_prev, t_curr = rng.normal(size=(4, 3))
    params = DiscreteParams(5.0, 0.7, 1.0, ConstantGamma(1.0), 10)
    y = extrapolate(_state(4, x_prev, x_curr, t_prev, t_curr), params)
    expected = x_curr + (1.0 - 5.0 / 4.0) * (x_curr - x_prev) - 0.7 * (t_curr - t_prev)
    np.testing.assert_allclose(y, expected, rtol=1e-14)
    with pytest.raises(ParameterError):
        extrapolate(_state(0, x_prev, x_curr, t_prev, t_curr), params)


def test_backward_step_linear_oracle():
    problem = SplitProblem(zero_operator(1), diagonal_cocoercive([1.0]))
    # T = (gamma/lam) x
    result = backward_resolve(problem, 3.0, 1.5, [2.0])
    assert result.x[0] == pytest.approx(2.0 / 1.5, abs=1e-12)
    assert not result.damped
    assert result.residual <= 1e-12


def test_backward_step_contraction_count(library):
    problem = library.build("rotation_identity").problem
    result = backward_resolve(problem, 110.0, 1.5, [1.0, 2.0])
    assert result.iterations <= math.ceil(math.log(1e-12) / math.log(2.0 / 110.0)) + 1
    np.testing.assert_allclose(result.x + result.t_op, [1.0, 2.0], atol=1e-12)


def test_backward_step_damped_branch(library):
    problem = library.build("rotation_identity").problem
    result = backward_resolve(problem, 0.15, 1.5, [1.0, 2.0])
    assert result.damped
    assert result.residual <= 1e-12
    np.testing.assert_allclose(result.t_op, fb_operator_eval(problem, 0.15, 1.5, result.x), rtol=1e-12)


def test_backward_step_reports_failure(library):
    problem = library.build("rotation_identity").problem
    with pytest.raises(InnerSolverError) as error:
        backward_resolve(problem, 0.15, 1.5, [1.0, 2.0], InnerSolverConfig({"inner_max_iters": 2}))
    assert error.value.iterations == 2
    assert error.value.residual > 1e-12


def test_zero_is_a_fixed_point(library):
    problem = library.build("rotation_identity").problem
    params = DiscreteParams(7.0, 0.8, 0.15, ConstantGamma(1.5), 20)
    state = initial_state(problem, params, [0.0, 0.0], [0.0, 0.0])
    nxt = step(state, params, problem)
    np.testing.assert_array_equal(nxt.x_curr, [0.0, 0.0])
    assert nxt.inner_iterations == 0
    iterates = run(problem, params, [0.0, 0.0], [0.0, 0.0])
    assert len(iterates) == 20
    assert np.all(iterates.series("norm_dx_times_k") == 0.0)
    assert np.all(iterates.series("norm_residual_times_gamma") == 0.0)


def test_discrete_preconditions():
    # (4 xi + 2)/(alpha - 1)^2 = 0.2 at alpha = 5, xi = 0.3
    assert not DiscreteParams(5.0, 0.3, 0.19, ConstantGamma(1.0), 10).validate(1.0).passed
    assert DiscreteParams(5.0, 0.3, 0.21, ConstantGamma(1.0), 10).validate(1.0).passed
    # (2 xi + 1)/(alpha - 1)^2 = 0.1
    assert DiscreteParams(5.0, 0.3, 0.11, PolynomialGamma(1.0, 2.0), 10).validate(math.inf, "b_zero").passed
    assert not DiscreteParams(5.0, 0.3, 0.09, PolynomialGamma(1.0, 2.0), 10).validate(math.inf, "b_zero").passed
    assert not DiscreteParams(5.0, 0.4, 1.0, ConstantGamma(2.5), 10).validate(1.0).passed


def test_index_clamp():
    params = DiscreteParams(3.0, 0.0, 0.5, PolynomialGamma(1.0, 2.0), 10)
    assert params.lambda_k(0) == params.lambda_k(1) == 0.5
    assert params.gamma_k(0) == 1.0
    assert params.lambda_k(3) == 4.5


def test_rotation_run_converges(library):
    problem = library.build("rotation_identity").problem
    params = DiscreteParams(7.0, 0.8, 0.15, ConstantGamma(1.5), 1000)
    iterates = run(problem, params, [1.0, 2.0], [0.0, 1.0])
    assert len(iterates) == 1000
    assert np.max(iterates.series("backward_residual")) <= 1e-10
    ks = iterates.ks()
    for name in ("norm_dx_times_k", "norm_xy_times_k"):
        series = iterates.series(name)
        assert np.max(series[ks >= 100]) <= 2.0 * series[ks == 100][0]
    assert np.linalg.norm(iterates.final().x) <= 1e-4


def test_run_rejects_invalid_parameters(library):
    problem = library.build("rotation_identity").problem
    with pytest.raises(ValidationError):
        run(problem, DiscreteParams(7.0, 0.8, 0.1, ConstantGamma(1.5), 10), [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ParameterError):
        run(problem, DiscreteParams(7.0, 0.8, 0.15, ConstantGamma(1.5), 10), [1.0, 2.0], [1.0, 2.0],
            closed_form="exact")


@pytest.mark.parametrize("name", ["abs", "half_square:2", "abs_plus_half_square"])
def test_closed_form_matches_inner_solver(library, name):
    spec = library.build(name)
    x0, x1 = np.linspace(1.0, 2.0, spec.dim), np.linspace(0.8, -0.5, spec.dim)
    params = DiscreteParams(3.0, 0.5, 1.0, PolynomialGamma(1.0, 2.0), 200)
    generic = run(spec.problem, params, x0, x1, "b_zero")
    closed = run(spec.problem, params, x0, x1, "b_zero", closed_form="exact")
    assert np.max(np.abs(generic.positions() - closed.positions())) <= 1e-8
    assert np.max(closed.series("backward_residual")) <= 1e-10


def test_closed_form_single_step_is_a_backward_step(library):
    spec = library.build("half_square")
    params = DiscreteParams(3.0, 0.5, 1.0, PolynomialGamma(1.0, 2.0), 10)
    state = initial_state(spec.problem, params, [1.0], [0.7])
    by_formula = b_zero_step(state, params, spec.problem.a)
    by_solver = step(state, params, spec.problem)
    np.testing.assert_allclose(by_formula.y, by_solver.y, rtol=1e-12)
    np.testing.assert_allclose(by_formula.x_curr, by_solver.x_curr, atol=1e-12)
    np.testing.assert_allclose(by_formula.t_curr, by_solver.t_curr, atol=1e-12)


def test_closed_form_variants_agree_when_gamma_is_lambda(library):
    spec = library.build("half_square")
    params = DiscreteParams(3.0, 0.5, 1.0, parse_gamma("lambda", 1.0), 50)
    exact = run(spec.problem, params, [1.0], [0.5], "b_zero", closed_form="exact")
    envelope = run(spec.problem, params, [1.0], [0.5], "b_zero", closed_form="envelope")
    printed = run(spec.problem, params, [1.0], [0.5], "b_zero", closed_form="printed")
    np.testing.assert_allclose(exact.positions(), envelope.positions(), atol=1e-12)
    assert np.max(np.abs(printed.positions() - exact.positions())) > 1e-6


def test_scaled_residual_vanishes(library):
    spec = library.build("abs")
    params = DiscreteParams(3.0, 0.0, 1.0, PolynomialGamma(1.0, 2.0), 200)
    series = run(spec.problem, params, [1.0], [0.8], "b_zero").series("norm_residual_times_gamma")
    assert series[-1] < 0.5 * series[0]
