from .problem import ProblemLibrary, ProblemSpec
from .runner import ExperimentConfig, cmd_compare, cmd_iterate, cmd_simulate, cmd_validate, run_batch

__all__ = [
    "ProblemLibrary",
    "ProblemSpec",
    "ExperimentConfig",
    "cmd_simulate",
    "cmd_iterate",
    "cmd_compare",
    "cmd_validate",
    "run_batch",
]
