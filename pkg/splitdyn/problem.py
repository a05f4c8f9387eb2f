import abc
import importlib
import logging
import os.path
import pkgutil
import typing

import numpy as np

from . import problems
from .operator import SplitProblem
from .utils import ConfigError

__all__ = ["Objective", "ProblemSpec", "ProblemBuilder", "ProblemLibrary", "split_name", "parse_floats"]

_LOGGER = logging.getLogger(__name__)

ValueOracle = typing.Callable[[np.ndarray], float]


class Objective(typing.NamedTuple):
    """f + g for A the subdifferential of f and B the gradient of g."""

    f: ValueOracle
    g: ValueOracle
    min_value: float
    envelope: typing.Optional[typing.Callable[[float, np.ndarray], float]] = None

    def __call__(self, x: np.ndarray) -> float:
        return self.f(x) + self.g(x)


class ProblemSpec(typing.NamedTuple):
    name: str
    problem: SplitProblem
    objective: typing.Optional[Objective]
    description: str

    @property
    def dim(self) -> int:
        return self.problem.dim

    @property
    def known_zero(self) -> np.ndarray:
        zero = self.problem.known_zero
        assert zero is not None
        return zero


def split_name(name: str) -> typing.Tuple[str, str]:
    kind, _, args = str(name).strip().partition(":")
    return kind.strip(), args.strip()


class ProblemBuilder(abc.ABC):
    NAMES: typing.Tuple[str, ...]

    @abc.abstractmethod
    def build(self, kind: str, args: str) -> ProblemSpec:
        raise NotImplementedError


class ProblemLibrary:
    def __init__(self):
        self._builders: typing.Dict[str, ProblemBuilder] = {}
        for _, module, _ in pkgutil.iter_modules([os.path.dirname(problems.__file__)]):
            builder = importlib.import_module("." + module, "splitdyn.problems").Builder()
            for name in builder.NAMES:
                if name in self._builders:
                    raise ConfigError(f"problem `{name}` registered twice")
                self._builders[name] = builder
        _LOGGER.debug("problem builders: %s", ", ".join(sorted(self._builders)))

    @property
    def names(self) -> typing.List[str]:
        return sorted(self._builders)

    def build(self, name: str) -> ProblemSpec:
        kind, args = split_name(name)
        if kind not in self._builders:
            raise ConfigError(f"unknown problem `{name}`, expected one of {', '.join(self.names)}")
        return self._builders[kind].build(kind, args)


def parse_floats(args: str) -> typing.List[float]:
    try:
        return [float(v) for v in args.split(",") if v.strip()]
    except ValueError as error:
        raise ConfigError(f"malformed problem arguments `{args}`") from error
