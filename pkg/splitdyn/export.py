import json
import logging
import pathlib
import typing

import numpy as np
import pandas as pd

from .dynamics import Trajectory
from .solver import IterateRun

__all__ = ["FLOAT_FORMAT", "trajectory_frame", "iterate_frame", "write_csv", "write_report", "report_path"]

_LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def trajectory_frame(
    traj: Trajectory, energies: np.ndarray, objective: typing.Optional[np.ndarray] = None
) -> pd.DataFrame:
    dim = traj.problem.dim
    positions, velocities = traj.positions(), traj.velocities()
    columns: typing.Dict[str, typing.Any] = {"t": traj.times()}
    for i in range(dim):
        columns[f"x[{i}]"] = positions[:, i]
    for i in range(dim):
        columns[f"xdot[{i}]"] = velocities[:, i]
    columns["norm_xdot"] = traj.norms("xdot")
    columns["norm_T"] = traj.norms("t_op")
    columns["norm_residual"] = traj.norms("residual")
    columns["energy"] = energies
    columns["objective"] = objective if objective is not None else np.full(len(traj), np.nan)
    return pd.DataFrame(columns)


def iterate_frame(run: IterateRun) -> pd.DataFrame:
    positions = run.positions()
    columns: typing.Dict[str, typing.Any] = {"k": run.ks()}
    for i in range(positions.shape[1]):
        columns[f"x_k[{i}]"] = positions[:, i]
    for name in ("norm_dx_times_k", "norm_residual_times_gamma", "norm_xy_times_k"):
        columns[name] = run.series(name)
    columns["inner_iters"] = np.array([r.inner_iters for r in run.records], dtype=int)
    return pd.DataFrame(columns)


def write_csv(path: typing.Union[str, pathlib.Path], frame: pd.DataFrame):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    _LOGGER.info("wrote %d rows to %s", len(frame), path)


def report_path(csv_path: typing.Union[str, pathlib.Path]) -> pathlib.Path:
    return pathlib.Path(csv_path).with_suffix(".json")


def write_report(path: typing.Union[str, pathlib.Path], report: typing.Dict[str, typing.Any]):
    with open(path, "w", encoding="utf-8") as file:
        json.dump(report, file, indent=2, sort_keys=True, default=_jsonable)
        file.write("\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")
