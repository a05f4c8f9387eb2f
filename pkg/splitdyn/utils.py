import os
import typing

import numpy as np

__all__ = [
    "SplitDynError",
    "ParameterError",
    "DomainError",
    "DimensionError",
    "DivergenceError",
    "InnerSolverError",
    "ValidationError",
    "ConfigError",
    "DEFAULT_SEED",
    "resolve_seed",
    "as_vector",
    "sample_pairs",
]

DEFAULT_SEED = 20210607
_SEED_ENV = "SPLITDYN_SEED"


class SplitDynError(Exception):
    pass


class ParameterError(SplitDynError, ValueError):
    pass


class DomainError(SplitDynError, ValueError):
    pass


class DimensionError(SplitDynError, ValueError):
    pass


class DivergenceError(SplitDynError):
    def __init__(self, t: float, norm: float):
        super().__init__(f"trajectory diverged at t={t:.6g} (|z|={norm:.3g})")
        self.t = t
        self.norm = norm


class InnerSolverError(SplitDynError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"backward step did not converge: residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class ValidationError(SplitDynError):
    def __init__(self, report):
        super().__init__("; ".join(report.violations))
        self.report = report


class ConfigError(SplitDynError):
    pass


def resolve_seed(seed: typing.Optional[int] = None) -> int:
    env_seed = os.environ.get(_SEED_ENV)
    if env_seed:
        return int(env_seed)
    return DEFAULT_SEED if seed is None else int(seed)


def as_vector(x, dim: typing.Optional[int] = None) -> np.ndarray:
    vector = np.atleast_1d(np.asarray(x, dtype=float))
    if vector.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {vector.shape}")
    if dim is not None and vector.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {vector.shape[0]}")
    return vector


def sample_pairs(
    dim: int, count: int, seed: typing.Optional[int] = None, box: float = 10.0
) -> typing.List[typing.Tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng(resolve_seed(seed))
    points = rng.uniform(-box, box, size=(count, 2, dim))
    return [(pair[0], pair[1]) for pair in points]
