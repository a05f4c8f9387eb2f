import abc
import math
import typing

from .utils import DomainError, ParameterError

__all__ = [
    "MODES",
    "A_ZERO_EPSILON_FRACTION",
    "DampingParams",
    "LambdaSchedule",
    "GammaSchedule",
    "ConstantGamma",
    "PolynomialGamma",
    "ExponentialGamma",
    "ValidationReport",
    "parse_gamma",
    "reduce_a_zero",
    "validate",
    "eval_lambda",
    "eval_gamma",
    "eval_gamma_dot",
]

MODES = ("general", "b_zero", "a_zero", "convex_min")

A_ZERO_EPSILON_FRACTION = 1e-3


class DampingParams:
    """alpha (viscous damping), xi (Hessian-type damping) and the initial time t0.

    Values are stored as given; ``validate`` reports the ones that break alpha > 1, xi >= 0, t0 > 0.
    """

    def __init__(self, alpha: float, xi: float = 0.0, t0: float = 1.0):
        self._alpha = float(alpha)
        self._xi = float(xi)
        self._t0 = float(t0)

    @property
    def alpha(self) -> float:
        return self._alpha

    @property
    def xi(self) -> float:
        return self._xi

    @property
    def t0(self) -> float:
        return self._t0

    def __repr__(self):
        return f"DampingParams(alpha={self._alpha:g}, xi={self._xi:g}, t0={self._t0:g})"


class LambdaSchedule:
    """lambda(t) = lambda0 * t^2."""

    def __init__(self, lambda0: float):
        self._lambda0 = float(lambda0)
        if not self._lambda0 > 0:
            raise ParameterError(f"lambda0 must be positive, got {lambda0}")

    @property
    def lambda0(self) -> float:
        return self._lambda0

    def value(self, t: float) -> float:
        return self._lambda0 * t * t

    def derivative(self, t: float) -> float:
        return 2.0 * self._lambda0 * t

    def __repr__(self):
        return f"LambdaSchedule({self._lambda0:g})"


class GammaSchedule(abc.ABC):
    PREFIX: str

    @abc.abstractmethod
    def value(self, t: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def derivative(self, t: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def limit_ratio(self, t0: float) -> float:
        """sup over t >= t0 of t * |gamma'(t)| / gamma(t), computed in closed form."""
        raise NotImplementedError

    @abc.abstractmethod
    def bounds(self, t0: float, t_end: typing.Optional[float] = None) -> typing.Tuple[float, float]:
        """(inf, sup) of gamma over [t0, t_end], or over [t0, inf) when t_end is None."""
        raise NotImplementedError

    @abc.abstractmethod
    def get_data(self) -> str:
        raise NotImplementedError

    @classmethod
    @abc.abstractmethod
    def from_data(cls, data: str) -> typing.Optional["GammaSchedule"]:
        raise NotImplementedError

    def __repr__(self):
        return f"GammaSchedule({self.get_data()})"

    def __eq__(self, other):
        return isinstance(other, GammaSchedule) and self.get_data() == other.get_data()

    def __hash__(self):
        return hash(self.get_data())


def _split_data(data: str, prefix: str) -> typing.Optional[typing.List[float]]:
    head, _, payload = data.partition(":")
    if head.strip() != prefix:
        return None
    try:
        return [float(v) for v in payload.split(",") if v.strip()]
    except ValueError as error:
        raise ParameterError(f"malformed gamma schedule `{data}`") from error


class ConstantGamma(GammaSchedule):
    PREFIX = "const"

    def __init__(self, c: float):
        if not c > 0:
            raise ParameterError(f"constant gamma must be positive, got {c}")
        self.c = float(c)

    def value(self, t: float) -> float:
        return self.c

    def derivative(self, t: float) -> float:
        return 0.0

    def limit_ratio(self, t0: float) -> float:
        return 0.0

    def bounds(self, t0: float, t_end: typing.Optional[float] = None) -> typing.Tuple[float, float]:
        return self.c, self.c

    def get_data(self) -> str:
        return f"{self.PREFIX}:{self.c:g}"

    @classmethod
    def from_data(cls, data: str) -> typing.Optional[GammaSchedule]:
        values = _split_data(data, cls.PREFIX)
        if values is None:
            return None
        if len(values) != 1:
            raise ParameterError(f"`{data}`: expected const:c")
        return cls(values[0])


class PolynomialGamma(GammaSchedule):
    """gamma(t) = a * t^n with a > 0, n >= 0."""

    PREFIX = "poly"

    def __init__(self, a: float, n: float):
        if not a > 0:
            raise ParameterError(f"polynomial gamma needs a positive leading coefficient, got {a}")
        if n < 0:
            raise ParameterError(f"polynomial gamma needs a nonnegative degree, got {n}")
        self.a = float(a)
        self.n = float(n)

    def value(self, t: float) -> float:
        return self.a * t**self.n

    def derivative(self, t: float) -> float:
        if self.n == 0:
            return 0.0
        return self.a * self.n * t ** (self.n - 1)

    def limit_ratio(self, t0: float) -> float:
        return self.n

    def bounds(self, t0: float, t_end: typing.Optional[float] = None) -> typing.Tuple[float, float]:
        if t_end is None:
            return self.value(t0), (math.inf if self.n > 0 else self.a)
        return self.value(t0), self.value(t_end)

    def get_data(self) -> str:
        return f"{self.PREFIX}:{self.a:g},{self.n:g}"

    @classmethod
    def from_data(cls, data: str) -> typing.Optional[GammaSchedule]:
        values = _split_data(data, cls.PREFIX)
        if values is None:
            return None
        if len(values) == 1:
            return cls(1.0, values[0])
        if len(values) == 2:
            return cls(values[0], values[1])
        raise ParameterError(f"`{data}`: expected poly:n or poly:a,n")


class ExponentialGamma(GammaSchedule):
    """gamma(t) = exp(t^-r); decreasing towards 1 for r > 0."""

    PREFIX = "exp"

    def __init__(self, r: float):
        self.r = float(r)

    def value(self, t: float) -> float:
        return math.exp(t ** (-self.r))

    def derivative(self, t: float) -> float:
        return -self.r * t ** (-self.r - 1.0) * self.value(t)

    def limit_ratio(self, t0: float) -> float:
        if self.r < 0:
            return math.inf
        return self.r * t0 ** (-self.r)

    def bounds(self, t0: float, t_end: typing.Optional[float] = None) -> typing.Tuple[float, float]:
        if self.r < 0:
            return self.value(t0), (math.inf if t_end is None else self.value(t_end))
        if t_end is None:
            return (1.0 if self.r > 0 else math.e), self.value(t0)
        return self.value(t_end), self.value(t0)

    def get_data(self) -> str:
        return f"{self.PREFIX}:{self.r:g}"

    @classmethod
    def from_data(cls, data: str) -> typing.Optional[GammaSchedule]:
        values = _split_data(data, cls.PREFIX)
        if values is None:
            return None
        if len(values) != 1:
            raise ParameterError(f"`{data}`: expected exp:r")
        return cls(values[0])


_GAMMA_KINDS: typing.List[typing.Type[GammaSchedule]] = [ConstantGamma, PolynomialGamma, ExponentialGamma]


def parse_gamma(data: str, lambda0: typing.Optional[float] = None) -> GammaSchedule:
    data = str(data).strip()
    if data == "lambda":
        if lambda0 is None:
            raise ParameterError("gamma `lambda` needs lambda0")
        return PolynomialGamma(lambda0, 2)
    for kind in _GAMMA_KINDS:
        schedule = kind.from_data(data)
        if schedule:
            return schedule
    raise ParameterError(f"unknown gamma schedule `{data}`")


class ValidationReport(typing.NamedTuple):
    mode: str
    violations: typing.List[str]
    notes: typing.List[str]

    @property
    def passed(self) -> bool:
        return not self.violations

    def __str__(self):
        lines = [f"mode {self.mode}: {'passed' if self.passed else 'FAILED'}"]
        lines += [f"  violation: {v}" for v in self.violations]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def reduce_a_zero(eta: float, beta: float, alpha: typing.Optional[float] = None) -> typing.Tuple[float, float]:
    """lambda0 = 2(beta - eps) eta and constant gamma = 2(beta - eps), eps = beta * 1e-3.

    Given alpha, eps is capped at half the slack beta - 1/(eta (alpha-1)^2) so that the reduced
    lambda0 stays above 2/(alpha-1)^2 whenever eta > 1/(beta (alpha-1)^2).
    """
    epsilon = beta * A_ZERO_EPSILON_FRACTION
    if alpha is not None and alpha > 1 and eta > 0:
        slack = beta - 1.0 / (eta * (alpha - 1.0) ** 2)
        if slack > 0:
            epsilon = min(epsilon, slack / 2.0)
    return 2.0 * (beta - epsilon) * eta, 2.0 * (beta - epsilon)


def validate(
    params: DampingParams,
    lam: LambdaSchedule,
    gam: GammaSchedule,
    beta: float,
    mode: str = "general",
    t_end: typing.Optional[float] = None,
) -> ValidationReport:
    if mode not in MODES:
        raise ParameterError(f"unknown mode `{mode}`, expected one of {', '.join(MODES)}")
    violations: typing.List[str] = []
    notes: typing.List[str] = []
    alpha, xi, t0 = params.alpha, params.xi, params.t0

    if not alpha > 1:
        violations.append(f"alpha <= 1: alpha > 1 required (alpha={alpha:g})")
    if not xi >= 0:
        violations.append(f"xi < 0: xi >= 0 required (xi={xi:g})")
    if not t0 > 0:
        violations.append(f"t0 <= 0: t0 > 0 required (t0={t0:g})")
        return ValidationReport(mode, violations, notes)

    inf_gamma, sup_gamma = gam.bounds(t0, t_end)
    horizon = "[t0, inf)" if t_end is None else f"[{t0:g}, {t_end:g}]"

    if alpha > 1:
        if mode == "b_zero":
            bound = 1.0 / (alpha - 1.0) ** 2
            if not lam.lambda0 > bound:
                violations.append(f"lambda0 > 1/(alpha-1)^2 = {bound:.6g} fails (lambda0={lam.lambda0:g})")
        elif mode == "a_zero":
            if not isinstance(gam, ConstantGamma):
                violations.append(f"a_zero mode needs a constant gamma, got {gam.get_data()}")
            else:
                eta = lam.lambda0 / gam.c
                bound = 1.0 / (beta * (alpha - 1.0) ** 2)
                if not eta > bound:
                    violations.append(f"eta > 1/(beta(alpha-1)^2) = {bound:.6g} fails (eta={eta:g})")
        else:
            bound = 2.0 / (alpha - 1.0) ** 2
            if not lam.lambda0 > bound:
                violations.append(f"lambda0 > 2/(alpha-1)^2 = {bound:.6g} fails (lambda0={lam.lambda0:g})")

    if not inf_gamma > 0:
        violations.append(f"inf gamma > 0 fails on {horizon} (inf={inf_gamma:g})")
    if mode != "b_zero" and not sup_gamma < 2.0 * beta:
        violations.append(f"sup gamma < 2 beta = {2.0 * beta:g} fails on {horizon} (sup={sup_gamma:g})")
    if mode == "convex_min" and sup_gamma > beta:
        notes.append(f"gamma exceeds 1/L = {beta:g}: the function-value rate is not covered")

    if not math.isfinite(gam.limit_ratio(t0)):
        violations.append(f"|gamma'(t)|/gamma(t) = O(1/t) fails for {gam.get_data()}")

    return ValidationReport(mode, violations, notes)


def _check_time(t: float, t0: float):
    if t < t0:
        raise DomainError(f"t={t:g} precedes t0={t0:g}")


def eval_lambda(lam: LambdaSchedule, t: float, t0: float) -> float:
    _check_time(t, t0)
    return lam.value(t)


def eval_gamma(gam: GammaSchedule, t: float, t0: float) -> float:
    _check_time(t, t0)
    return gam.value(t)


def eval_gamma_dot(gam: GammaSchedule, t: float, t0: float) -> float:
    _check_time(t, t0)
    return gam.derivative(t)
