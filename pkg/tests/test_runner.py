import csv
import json
import sys

import numpy as np
import pytest

from splitdyn.__main__ import entry_point
from splitdyn.runner import (
    PRESETS,
    ExperimentConfig,
    cmd_compare,
    cmd_iterate,
    cmd_simulate,
    cmd_validate,
    exit_code,
    run_batch,
)
from splitdyn.utils import ConfigError, DivergenceError, InnerSolverError, ParameterError, ValidationError

B_ZERO_DISCRETE = {
    "problem": "abs",
    "mode": "b_zero",
    "scheme": "discrete",
    "alpha": 3.0,
    "xi": 0.5,
    "lambda0": 1.0,
    "gamma": "poly:2",
    "n_iters": 200,
    "x0": [1.0],
    "x1": [0.5],
}


def _header(path):
    with open(path, newline="", encoding="utf-8") as file:
        return next(csv.reader(file))


def _rows(path):
    with open(path, newline="", encoding="utf-8") as file:
        return list(csv.reader(file))[1:]


def test_config_errors():
    with pytest.raises(ConfigError, match="problem"):
        ExperimentConfig({"alpha": 3.0, "x0": [1.0]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_preset("7")
    with pytest.raises(ConfigError, match="scheme"):
        ExperimentConfig({"problem": "abs", "alpha": 3.0, "x0": [1.0], "scheme": "implicit"})
    config = ExperimentConfig({"problem": "abs", "alpha": 3.0, "x0": "1", "gamma": "const:1"})
    np.testing.assert_array_equal(config.x0, [1.0])
    with pytest.raises(ConfigError, match="lambda0"):
        cmd_simulate(config)
    with pytest.raises(ConfigError, match="unknown problem"):
        cmd_validate(config.replace(problem="nope", lambda0=1.0))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate(name):
    assert cmd_validate(ExperimentConfig.from_preset(name)).passed


def test_validate_reports_violations():
    report = cmd_validate(ExperimentConfig.from_preset("5.3", {"alpha": 1.0}))
    assert not report.passed
    assert any("alpha > 1" in v for v in report.violations)
    report = cmd_validate(ExperimentConfig.from_preset("6", {"lambda0": 0.1}))
    assert not report.passed
    assert cmd_validate(ExperimentConfig.from_preset("5.3")).notes


def test_simulate_writes_csv_and_report(tmp_path):
    output = tmp_path / "rotation.csv"
    result = cmd_simulate(ExperimentConfig.from_preset("5.3", {"t_end": 10.0, "output": str(output)}))
    assert _header(output) == [
        "t",
        "x[0]",
        "x[1]",
        "xdot[0]",
        "xdot[1]",
        "norm_xdot",
        "norm_T",
        "norm_residual",
        "energy",
        "objective",
    ]
    rows = _rows(output)
    assert len(rows) == len(result.trajectory)
    assert float(rows[0][0]) == 1.0
    assert float(rows[-1][0]) == pytest.approx(10.0)
    assert all(row[-1] == "" for row in rows)

    with open(tmp_path / "rotation.json", encoding="utf-8") as file:
        report = json.load(file)
    assert report["config"]["problem"] == "rotation_identity"
    assert report["final_distance"] == pytest.approx(result.report.final_distance)
    assert set(report["fits"]) == {"speed", "T", "residual"}


def test_simulate_is_deterministic(tmp_path):
    contents = []
    for name in ("first.csv", "second.csv"):
        config = ExperimentConfig.from_preset("5.3", {"t_end": 5.0, "xi": 0.8, "output": str(tmp_path / name)})
        cmd_simulate(config)
        contents.append((tmp_path / name).read_bytes())
    assert contents[0] == contents[1]


def test_rotation_converges():
    for xi in (0.0, 0.8):
        report = cmd_simulate(ExperimentConfig.from_preset("5.3", {"xi": xi})).report
        assert report.final_distance <= 1e-2
        assert report.fits["speed"].slope < -2.0
        for name, partials in report.extra["integrals"].items():
            assert (partials[-1] - partials[-2]) / partials[-1] < 0.05, name


def test_quadratic_rates_and_oscillations():
    plain = ExperimentConfig.from_preset("5.1")
    report = cmd_simulate(plain).report
    assert report.fits["speed"].slope <= -1.0
    assert report.fits["residual"].slope < 0.0
    assert report.fits["objective"].slope < -0.2
    for name, partials in report.extra["integrals"].items():
        assert (partials[-1] - partials[-2]) / partials[-1] < 0.05, name

    comparison = cmd_compare(plain, plain.replace(xi=0.2), "oscillations")
    assert comparison.summary["right_sign_changes"] < comparison.summary["left_sign_changes"]


def test_a_zero_near_threshold_keeps_dissipation_check():
    # eta just above 1/(beta (alpha-1)^2) with beta = 0.01, alpha = 20
    config = ExperimentConfig.from_preset("5.1", {"eta": 1.0003 / (0.01 * 19.0**2), "t_end": 20.0})
    assert cmd_validate(config).passed
    result = cmd_simulate(config)
    assert result.report.dissipation is not None
    assert result.report.dissipation.epsilon > 0


def test_skipped_dissipation_check_is_a_warning(caplog):
    config = ExperimentConfig.from_preset("5.3", {"t_end": 5.0, "epsilon": 100.0})
    with caplog.at_level("WARNING", logger="splitdyn.runner"):
        result = cmd_simulate(config)
    assert result.report.dissipation is None
    assert any("dissipation check skipped" in r.getMessage() for r in caplog.records)


@pytest.mark.parametrize(
    "problem, fit", [("half_square", "objective"), ("abs", "envelope_gap"), ("abs_plus_half_square", "envelope_gap")]
)
def test_fast_gamma_rates(problem, fit):
    report = cmd_simulate(ExperimentConfig.from_preset("5.2", {"problem": problem})).report
    assert report.fits[fit].slope <= -6.4


def test_compare_gamma_growth():
    base = ExperimentConfig.from_preset("5.2")
    comparison = cmd_compare(base.replace(gamma="lambda"), base, "envelope_gap")
    assert comparison.ratio_at(10.0) >= 10.0
    assert comparison.summary["ratio_at_end"] >= 10.0


def test_compare_identical_runs(tmp_path):
    config = ExperimentConfig.from_preset("5.3", {"t_end": 5.0})
    comparison = cmd_compare(config.replace(output=str(tmp_path / "cmp.csv")), config, "norm_x")
    assert comparison.ratio_at(3.0) == pytest.approx(1.0)
    assert comparison.summary["ratio_at_end"] == pytest.approx(1.0)
    assert _header(tmp_path / "cmp.csv") == ["t", "left", "right"]
    with pytest.raises(ConfigError, match="different problems"):
        cmd_compare(config, config.replace(problem="zero:2"), "norm_x")
    with pytest.raises(ConfigError):
        cmd_compare(config, config, "objective")


def test_iterate_rotation(tmp_path):
    output = tmp_path / "iterates.csv"
    result = cmd_iterate(ExperimentConfig.from_preset("6", {"n_iters": 200, "output": str(output)}))
    assert _header(output) == [
        "k",
        "x_k[0]",
        "x_k[1]",
        "norm_dx_times_k",
        "norm_residual_times_gamma",
        "norm_xy_times_k",
        "inner_iters",
    ]
    rows = _rows(output)
    assert len(rows) == 200
    assert rows[0][0] == "1"
    assert result.report.extra["max_backward_residual"] <= 1e-10
    assert result.report.extra["dx_boundedness"] <= 2.0
    assert "closed_form_agreement" not in result.report.extra


def test_iterate_closed_form_agreement():
    report = cmd_iterate(ExperimentConfig(B_ZERO_DISCRETE)).report
    assert report.extra["closed_form_agreement"] <= 1e-8
    report = cmd_iterate(ExperimentConfig({**B_ZERO_DISCRETE, "closed_form": "exact"})).report
    assert report.extra["closed_form_agreement"] <= 1e-8


def test_iterate_rejects_bad_parameters():
    with pytest.raises(ValidationError):
        cmd_iterate(ExperimentConfig.from_preset("6", {"lambda0": 0.1}))
    with pytest.raises(InnerSolverError):
        cmd_iterate(ExperimentConfig.from_preset("6", {"n_iters": 5, "inner_max_iters": 1}))


def test_exit_codes():
    assert exit_code(InnerSolverError(1.0, 3)) == 4
    assert exit_code(DivergenceError(2.0, 1e13)) == 3
    assert exit_code(ConfigError("bad")) == 2
    assert exit_code(ParameterError("bad")) == 2


def test_run_batch_survives_failures():
    def failing():
        raise InnerSolverError(1.0, 200)

    outcomes = run_batch([lambda: 1, failing, lambda: 3], workers=2)
    assert [o.code for o in outcomes] == [0, 4, 0]
    assert outcomes[0].result == 1 and outcomes[2].result == 3
    with pytest.raises(ParameterError):
        run_batch([], workers=0)


def test_entry_point_validate(monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", ["splitdyn", "validate", "--preset", "5.3"])
    with pytest.raises(SystemExit) as exited:
        entry_point()
    assert exited.value.code == 0
    assert "passed" in capsys.readouterr().out

    monkeypatch.setattr(sys, "argv", ["splitdyn", "validate", "--preset", "5.3", "--alpha", "1"])
    with pytest.raises(SystemExit) as exited:
        entry_point()
    assert exited.value.code == 2
    assert "alpha > 1" in capsys.readouterr().err


def test_entry_point_overrides(monkeypatch, capsys):
    monkeypatch.setattr(
        sys, "argv", ["splitdyn", "validate", "--preset", "6", "--set", "lambda0=0.1", "--set", "n_iters=10"]
    )
    with pytest.raises(SystemExit) as exited:
        entry_point()
    assert exited.value.code == 2
    assert "lambda0" in capsys.readouterr().err
