"""Market primitives together with the congestion and valuation models.

Users of valuation type ``theta`` choose between no adoption (utility 0), the
base technology and the base+supplementary bundle.  For fixed adoption levels
each utility is affine in ``theta``, so the population splits at three
valuation thresholds; the willingness fractions ``(h1, h12)`` follow from the
ordering of those thresholds and the valuation CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Union

from .errors import DomainError, ModelInconsistencyError, ParameterError
from .special import beta_pdf, betainc_reg

TIE_TOL = 1e-9
REGIONS = ("a", "b", "c", "d", "e", "f", "g")


# ---------------------------------------------------------------------------
# parameters and states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Exogenous market.

    Qualities and slopes use the monetary unit of the prices.  ``p`` and
    ``delta`` may be negative (subsidies).
    """

    q1: float
    q2: float
    gamma1: float
    gamma2: float
    eta: float
    p: float
    delta: float
    rho: float = 1.0

    def __post_init__(self):
        for name in ("q1", "q2", "gamma1", "gamma2", "eta", "p", "delta", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if not self.q1 > 0:
            raise ParameterError("q1 must be positive")
        if not self.q2 > self.q1:
            raise ParameterError("q2 must exceed q1")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ParameterError("gamma1 and gamma2 must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError("eta must lie in [0, 1]")
        if not 0.0 < self.rho <= 1.0:
            raise ParameterError("rho must lie in (0, 1]")

    @property
    def bundle_quality(self) -> float:
        """Coverage-weighted intrinsic quality of the bundle."""
        return (1.0 - self.eta) * self.q1 + self.eta * self.q2

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


class AdoptionState(NamedTuple):
    """Fractions adopting the base technology only and the bundle."""

    x1: float
    x12: float

    def is_valid(self, tol: float = 0.0) -> bool:
        return self.x1 >= -tol and self.x12 >= -tol and self.x1 + self.x12 <= 1.0 + tol


def check_state(state) -> AdoptionState:
    state = AdoptionState(float(state[0]), float(state[1]))
    if not (math.isfinite(state.x1) and math.isfinite(state.x12)):
        raise DomainError(f"non-finite adoption state {state}")
    if not state.is_valid(1e-12):
        raise DomainError(f"adoption state {tuple(state)} is outside the simplex")
    return state


def project_to_simplex(x1: float, x12: float) -> AdoptionState:
    """Clip to ``{x1, x12 >= 0, x1 + x12 <= 1}`` (used for round-off only)."""
    x1 = max(x1, 0.0)
    x12 = max(x12, 0.0)
    total = x1 + x12
    if total > 1.0:
        x1, x12 = x1 / total, x12 / total
    return AdoptionState(x1, x12)


# ---------------------------------------------------------------------------
# congestion (throughput degradation) models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Linear:
    """``T(x) = -gamma * x``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError("linear slope gamma must be positive")

    def __call__(self, x: float) -> float:
        return -self.gamma * x

    def derivative(self, x: float) -> float:
        return -self.gamma

    def max_slope(self) -> float:
        return self.gamma


@dataclass(frozen=True)
class LogMarkov:
    """Throughput loss of a processor-sharing cell, relative to its peak rate.

    ``T(x) = -r0 * (1 + (1 - u) * log(1 - u) / u)`` with ``u = nu * x``.
    ``T(0) = 0`` and ``T`` is strictly decreasing while ``u < 1``.
    """

    r0: float
    nu: float

    def __post_init__(self):
        if not self.r0 > 0:
            raise ParameterError("r0 must be positive")
        if not 0.0 < self.nu < 1.0:
            raise ParameterError("nu must lie in (0, 1)")

    def _u(self, x: float) -> float:
        u = self.nu * x
        if u >= 1.0:
            raise DomainError(f"log-Markov throughput undefined for nu*x = {u} >= 1")
        return u

    def __call__(self, x: float) -> float:
        u = self._u(x)
        if abs(u) < 1e-4:
            # 1 + (1-u)log(1-u)/u = u/2 + u^2/6 + u^3/12 + u^4/20 + ...
            s = u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 12.0 + u / 20.0)))
        else:
            s = 1.0 + (1.0 - u) * math.log1p(-u) / u
        return -self.r0 * s

    def derivative(self, x: float) -> float:
        u = self._u(x)
        if abs(u) < 1e-4:
            # (-u - log(1-u)) / u^2 = 1/2 + u/3 + u^2/4 + ...
            gp = 0.5 + u * (1.0 / 3.0 + u * (0.25 + u / 5.0))
        else:
            gp = (-u - math.log1p(-u)) / (u * u)
        return -self.r0 * self.nu * gp

    def max_slope(self) -> float:
        return abs(self.derivative(1.0))


Throughput = Union[Linear, LogMarkov]


# ---------------------------------------------------------------------------
# valuation distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    def cdf(self, t: float) -> float:
        return min(max(t, 0.0), 1.0)

    def pdf(self, t: float) -> float:
        return 1.0 if 0.0 <= t <= 1.0 else 0.0

    def max_density(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("beta distribution shapes must be positive")

    def cdf(self, t: float) -> float:
        return betainc_reg(self.alpha, self.beta, t)

    def pdf(self, t: float) -> float:
        return beta_pdf(self.alpha, self.beta, t)

    def max_density(self) -> float:
        a, b = self.alpha, self.beta
        if a < 1 or b < 1:
            return math.inf
        if a == 1 and b == 1:
            return 1.0
        mode = (a - 1.0) / (a + b - 2.0)
        return beta_pdf(a, b, mode)


Distribution = Union[Uniform, Beta]

UNIFORM = Uniform()


def default_models(params: ModelParams, t1=None, t2=None, dist=None):
    """Fill unspecified congestion models / distribution with the linear-uniform defaults."""
    if t1 is None:
        t1 = Linear(params.gamma1)
    if t2 is None:
        t2 = Linear(params.gamma2)
    if dist is None:
        dist = UNIFORM
    return t1, t2, dist


# ---------------------------------------------------------------------------
# utilities and thresholds
# ---------------------------------------------------------------------------

def base_load(state: AdoptionState, eta: float) -> float:
    """Traffic carried by the base network."""
    return state[0] + (1.0 - eta) * state[1]


def utilities(state, params: ModelParams, t1=None, t2=None, theta: float = 0.0):
    """Utilities ``(u1, u12)`` of a user of type ``theta``; non-adoption is 0."""
    state = check_state(state)
    t1, t2, _ = default_models(params, t1, t2)
    if not 0.0 <= theta <= 1.0:
        raise DomainError("theta must lie in [0, 1]")
    eta = params.eta
    base = theta * params.q1 + t1(base_load(state, eta))
    u1 = base - params.p
    u12 = (1.0 - eta) * base + eta * (theta * params.q2 + t2(eta * state.x12)) - (params.p + params.delta)
    return u1, u12


@dataclass(frozen=True)
class Thresholds:
    """Valuation thresholds; ``theta_a_b`` is where choice a starts beating choice b.

    ``degenerate`` marks ``eta == 0``, where the bundle-vs-base threshold is
    replaced by +/-inf (bundle dominated / dominant).
    """

    theta_1_0: float
    theta_12_1: float
    theta_12_0: float
    degenerate: bool = False

    @property
    def base_first(self) -> bool:
        """True when base beats nothing at a lower valuation than the bundle does.

        ``theta_12_0`` always lies between the other two thresholds, so this
        is decided by comparing those two; at tiny ``eta`` ``theta_12_0``
        rounds onto ``theta_1_0`` and would give the wrong answer.
        """
        return self.theta_1_0 <= self.theta_12_1


def thresholds(state, params: ModelParams, t1=None, t2=None) -> Thresholds:
    state = check_state(state)
    t1, t2, _ = default_models(params, t1, t2)
    eta = params.eta
    T1 = t1(base_load(state, eta))
    T2 = t2(eta * state.x12)
    theta_10 = (params.p - T1) / params.q1
    theta_120 = (-(1.0 - eta) * T1 - eta * T2 + params.p + params.delta) / params.bundle_quality
    if eta == 0.0:
        theta_121 = math.inf if params.delta >= 0 else -math.inf
        return Thresholds(theta_10, theta_121, theta_120, degenerate=True)
    theta_121 = (T2 - T1 - params.delta / eta) / (params.q1 - params.q2)
    return Thresholds(theta_10, theta_121, theta_120)


def _unit(t: float) -> float:
    return min(max(t, 0.0), 1.0)


def willingness_from_thresholds(th: Thresholds, dist: Distribution = UNIFORM):
    if th.base_first:
        f121 = dist.cdf(_unit(th.theta_12_1))
        h1 = max(f121 - dist.cdf(_unit(th.theta_1_0)), 0.0)
        return h1, 1.0 - f121
    return 0.0, 1.0 - dist.cdf(_unit(th.theta_12_0))


def willingness(state, params: ModelParams, t1=None, t2=None, dist=None):
    """Fractions ``(h1, h12)`` of users for whom base / bundle is utility-maximizing."""
    t1, t2, dist = default_models(params, t1, t2, dist)
    return willingness_from_thresholds(thresholds(state, params, t1, t2), dist)


def region_of(th: Thresholds, tol: float = TIE_TOL) -> str:
    """Region label from the threshold ordering; ties resolve to the earliest label."""
    a, b, c = th.theta_1_0, th.theta_12_1, th.theta_12_0

    def lt(x, y):
        return x < y + tol

    if lt(b, 0) and lt(c, 0):
        return "a"
    if lt(a, 0) and lt(0, b) and lt(b, 1):
        return "b"
    if lt(0, a) and lt(a, b) and lt(b, 1):
        return "c"
    if lt(0, a) and lt(a, 1) and lt(1, b):
        return "d"
    if lt(0, c) and lt(c, 1) and lt(c, a):
        return "e"
    if lt(a, 0) and lt(1, b):
        return "f"
    if lt(1, a) and lt(1, c):
        return "g"
    raise ModelInconsistencyError(
        "threshold ordering matches no region",
        {"theta_1_0": a, "theta_12_1": b, "theta_12_0": c},
    )


def classify_region(state, params: ModelParams, t1=None, t2=None) -> str:
    return region_of(thresholds(state, params, t1, t2))


def uniform_willingness_table(region: str, th: Thresholds):
    """Closed-form ``(h1, h12)`` per region for uniform valuations."""
    if region in ("a",):
        return 0.0, 1.0
    if region == "b":
        return th.theta_12_1, 1.0 - th.theta_12_1
    if region == "c":
        return th.theta_12_1 - th.theta_1_0, 1.0 - th.theta_12_1
    if region == "d":
        return 1.0 - th.theta_1_0, 0.0
    if region == "e":
        return 0.0, 1.0 - th.theta_12_0
    if region == "f":
        return 1.0, 0.0
    if region == "g":
        return 0.0, 0.0
    raise ValueError(f"unknown region {region!r}")
