"""Two providers: provider 1 sells the base technology and the bundle, provider 2 sells
a competing base technology (technology 3).

Willingness is computed by exact piecewise argmax over valuation types: the
four utilities are affine in ``theta``, so between consecutive thresholds
the best choice is constant and a single midpoint evaluation decides it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ModelInconsistencyError, NumericalFailure, ParameterError
from .model import UNIFORM, ModelParams

TIE_TOL = 1e-9
CHOICES = ("none", "base", "bundle", "rival")

# vertices and face centroids of {x1, x12, x3 >= 0, sum <= 1}
MULTI_STARTS = (
    (0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
    (1 / 3, 1 / 3, 1 / 3), (1 / 3, 1 / 3, 0.0), (1 / 3, 0.0, 1 / 3), (0.0, 1 / 3, 1 / 3),
)


@dataclass(frozen=True)
class MultiParams:
    base: ModelParams
    q3: float
    gamma3: float
    p3: float  # may be +inf (provider 2 absent)

    def __post_init__(self):
        b = self.base
        if not b.eta > 0:
            raise ParameterError("the two-provider model needs eta > 0")
        if not (math.isfinite(self.q3) and math.isfinite(self.gamma3)):
            raise ParameterError("q3 and gamma3 must be finite")
        if not self.gamma3 > 0:
            raise ParameterError("gamma3 must be positive")
        if math.isnan(self.p3) or self.p3 == -math.inf:
            raise ParameterError("p3 must be a number or +inf")
        Q = b.bundle_quality
        if not self.q3 > b.q1:
            raise ParameterError(
                "need q3 > q1; for q3 < q1 relabel the rival-vs-base threshold as base-vs-rival"
            )
        if not self.q3 < Q:
            raise ParameterError(
                f"need q3 < (1-eta) q1 + eta q2 = {Q}; for larger q3 relabel the "
                "bundle-vs-rival threshold as rival-vs-bundle"
            )

    @property
    def absent_rival(self) -> bool:
        return self.p3 == math.inf


class MultiState(NamedTuple):
    x1: float
    x12: float
    x3: float


def check_multi_state(state) -> MultiState:
    s = MultiState(*(float(v) for v in state))
    if not all(math.isfinite(v) for v in s):
        raise DomainError(f"non-finite state {s}")
    if min(s) < -1e-12 or sum(s) > 1 + 1e-12:
        raise DomainError(f"state {tuple(s)} is outside the simplex")
    return s


def project_multi(state) -> MultiState:
    v = [max(float(x), 0.0) for x in state]
    total = sum(v)
    if total > 1.0:
        v = [x / total for x in v]
    return MultiState(*v)


@dataclass(frozen=True)
class MultiThresholds:
    theta_1_0: float
    theta_12_1: float
    theta_12_0: float
    theta_3_0: float
    theta_3_1: float
    theta_12_3: float

    def as_dict(self) -> dict:
        return {
            "theta_1_0": self.theta_1_0, "theta_12_1": self.theta_12_1,
            "theta_12_0": self.theta_12_0, "theta_3_0": self.theta_3_0,
            "theta_3_1": self.theta_3_1, "theta_12_3": self.theta_12_3,
        }


def _congestion(state: MultiState, mp: MultiParams):
    b = mp.base
    T1 = -b.gamma1 * (state.x1 + (1 - b.eta) * state.x12)
    T2 = -b.gamma2 * b.eta * state.x12
    T3 = -mp.gamma3 * state.x3
    return T1, T2, T3


def multi_thresholds(state, mp: MultiParams) -> MultiThresholds:
    s = check_multi_state(state)
    b = mp.base
    eta = b.eta
    T1, T2, T3 = _congestion(s, mp)
    Q = b.bundle_quality
    t10 = (b.p - T1) / b.q1
    t121 = (T2 - T1 - b.delta / eta) / (b.q1 - b.q2)
    t120 = (-(1 - eta) * T1 - eta * T2 + b.p + b.delta) / Q
    if mp.absent_rival:
        t30, t31, t123 = math.inf, math.inf, -math.inf
    else:
        t30 = (mp.p3 - T3) / mp.q3
        t31 = (T1 - T3 - b.p + mp.p3) / (mp.q3 - b.q1)
        t123 = (T3 - (1 - eta) * T1 - eta * T2 + b.p + b.delta - mp.p3) / (Q - mp.q3)
    return MultiThresholds(t10, t121, t120, t30, t31, t123)


def multi_utilities(state, mp: MultiParams, theta):
    """Utilities of (none, base, bundle, rival) for valuation(s) ``theta``."""
    s = check_multi_state(state)
    b = mp.base
    T1, T2, T3 = _congestion(s, mp)
    theta = np.asarray(theta, dtype=float)
    u0 = np.zeros_like(theta)
    base = theta * b.q1 + T1
    u1 = base - b.p
    u12 = (1 - b.eta) * base + b.eta * (theta * b.q2 + T2) - (b.p + b.delta)
    if mp.absent_rival:
        u3 = np.full_like(theta, -np.inf)
    else:
        u3 = theta * mp.q3 + T3 - mp.p3
    return u0, u1, u12, u3


def multi_willingness(state, mp: MultiParams, dist=UNIFORM):
    """Fractions ``(h1, h12, h3)`` for which base, bundle or rival is utility-maximizing."""
    s = check_multi_state(state)
    th = multi_thresholds(s, mp)
    b = mp.base
    T1, T2, T3 = _congestion(s, mp)
    # intercepts and slopes of the affine utilities (none, base, bundle, rival)
    c1, c12 = T1 - b.p, (1 - b.eta) * T1 + b.eta * T2 - b.p - b.delta
    k1, k12 = b.q1, b.bundle_quality
    rival = not mp.absent_rival
    c3, k3 = (T3 - mp.p3, mp.q3) if rival else (0.0, 0.0)
    cuts = sorted({0.0, 1.0} | {min(max(v, 0.0), 1.0) for v in th.as_dict().values()})
    mass = [0.0, 0.0, 0.0, 0.0]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        t = 0.5 * (lo + hi)
        u = [0.0, c1 + k1 * t, c12 + k12 * t, c3 + k3 * t if rival else -math.inf]
        best = max(range(4), key=u.__getitem__)
        mass[best] += dist.cdf(hi) - dist.cdf(lo)
    return mass[1], mass[2], mass[3]


def brute_force_willingness(state, mp: MultiParams, n: int = 1_000_000):
    """Uniform-valuation willingness by argmax on an ``n``-point midpoint grid."""
    theta = (np.arange(n) + 0.5) / n
    u = np.vstack(multi_utilities(state, mp, theta))
    best = np.argmax(u, axis=0)
    counts = np.bincount(best, minlength=4) / n
    return float(counts[1]), float(counts[2]), float(counts[3])


# ---------------------------------------------------------------------------
# ordering families
# ---------------------------------------------------------------------------

# signs of orderings (a)-(d); + means the listed order holds:
# (a) t10 < t120, (b) t10 < t30, (c) t30 < t120, (d) t31 < t121
FAMILY_SIGNS = {
    (True, True, True, True): 1,
    (True, True, True, False): 2,
    (True, True, False, False): 3,
    (False, False, False, False): 4,
    (False, False, False, True): 5,
    (False, False, True, True): 6,
    (False, True, False, False): 7,
    (True, False, True, True): 8,
}

# each family's order; inner tuples are adjacent pairs whose order a tiebreaker decides
FAMILY_SEQUENCES = {
    1: ("theta_1_0", "theta_3_0", ("theta_12_0", "theta_3_1"), "theta_12_1", "theta_12_3"),
    2: ("theta_1_0", "theta_3_0", "theta_12_0", "theta_12_3", "theta_12_1", "theta_3_1"),
    3: (("theta_1_0", "theta_12_3"), "theta_12_0", ("theta_3_0", "theta_12_1"), "theta_3_1"),
    4: ("theta_12_3", "theta_12_1", ("theta_3_1", "theta_12_0"), "theta_3_0", "theta_1_0"),
    5: ("theta_3_1", "theta_12_1", "theta_12_3", "theta_12_0", "theta_3_0", "theta_1_0"),
    6: ("theta_3_1", ("theta_3_0", "theta_12_1"), "theta_12_0", ("theta_1_0", "theta_12_3")),
    7: ("theta_12_3", "theta_12_1", "theta_12_0", "theta_1_0", "theta_3_0", "theta_3_1"),
    8: ("theta_3_1", "theta_3_0", "theta_1_0", "theta_12_0", "theta_12_1", "theta_12_3"),
}

# tiebreakers (e)-(g) by the pair they order
TIEBREAKERS = {
    frozenset(("theta_3_0", "theta_12_1")): "e",
    frozenset(("theta_3_1", "theta_12_0")): "f",
    frozenset(("theta_12_3", "theta_1_0")): "g",
}


@dataclass
class OrderingFamily:
    family_index: int
    resolved_sequence: tuple
    signs: tuple
    tiebreakers: dict = field(default_factory=dict)


def pairwise_equivalences(th: MultiThresholds) -> dict:
    """Both sides of each threshold equivalence (b)-(d); the two booleans must agree."""
    return {
        "b": (th.theta_1_0 < th.theta_3_0, th.theta_3_0 < th.theta_3_1),
        "c": (th.theta_3_0 < th.theta_12_0, th.theta_12_0 < th.theta_12_3),
        "d": (th.theta_3_1 < th.theta_12_1, th.theta_12_1 < th.theta_12_3),
    }


def _near_ties(values: dict, tol: float) -> list:
    items = sorted(values.items(), key=lambda kv: kv[1])
    return [(a[0], b[0]) for a, b in zip(items[:-1], items[1:]) if abs(a[1] - b[1]) <= tol * max(1.0, abs(a[1]))]


def classify_ordering(state, mp: MultiParams, tol: float = TIE_TOL) -> OrderingFamily:
    """Ordering family of the six thresholds from the signs of orderings (a)-(d).

    Within-family pairs are resolved by tiebreakers (e)-(g); the resulting
    sequence must equal a direct sort of the thresholds.
    """
    if mp.absent_rival:
        raise DomainError("ordering families need a finite rival price")
    th = multi_thresholds(state, mp)
    vals = th.as_dict()
    signs = (
        th.theta_1_0 < th.theta_12_0,
        th.theta_1_0 < th.theta_3_0,
        th.theta_3_0 < th.theta_12_0,
        th.theta_3_1 < th.theta_12_1,
    )
    family = FAMILY_SIGNS.get(signs)
    if family is None:
        raise ModelInconsistencyError(
            "threshold signs violate the ordering dependencies",
            {"signs": signs, "thresholds": vals},
        )
    seq = []
    used = {}
    for item in FAMILY_SEQUENCES[family]:
        if isinstance(item, tuple):
            a, b = item
            tb = TIEBREAKERS[frozenset(item)]
            first_a = vals[a] <= vals[b]
            used[tb] = f"{a} < {b}" if first_a else f"{b} < {a}"
            seq.extend((a, b) if first_a else (b, a))
        else:
            seq.append(item)
    direct = sorted(vals, key=lambda k: vals[k])
    if seq != direct:
        # orders differing only inside near-ties are the same ordering
        ties = {frozenset(p) for p in _near_ties(vals, tol)}
        mismatch = [frozenset((x, y)) for x, y in zip(seq, direct) if x != y]
        if not all(m in ties for m in mismatch):
            raise ModelInconsistencyError(
                f"family {family} sequence disagrees with the sorted thresholds",
                {"family_sequence": seq, "sorted": direct, "thresholds": vals},
            )
    return OrderingFamily(family, tuple(seq), signs, used)


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------

@dataclass
class MultiEquilibrium:
    state: MultiState
    residual: float
    converged: bool
    endpoints: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    agreement: float = 0.0
    agree: bool = True

    @property
    def total(self) -> float:
        return sum(self.state)


def multi_residual(state, mp: MultiParams, dist=UNIFORM) -> float:
    h = multi_willingness(state, mp, dist)
    return max(abs(h[i] - state[i]) for i in range(3))


def _multi_step_size(mp: MultiParams) -> float:
    b = mp.base
    slope = (b.gamma1 / b.q1 + (b.gamma1 + b.gamma2) / (b.q2 - b.q1) + b.gamma1 / b.bundle_quality
             + mp.gamma3 / mp.q3 + (b.gamma1 + mp.gamma3) / (mp.q3 - b.q1)
             + (b.gamma1 + b.gamma2 + mp.gamma3) / (b.bundle_quality - mp.q3))
    return min(0.05, 1.0 / (1.0 + 2.0 * slope)) / b.rho


def integrate_multi(x0, mp: MultiParams, dist=UNIFORM, horizon: float = 2000.0, step=None,
                    tol: float = 1e-9):
    """Fixed-step RK4 on ``x' = rho (H(x) - x)`` for the three adoption fractions.

    Returns ``(state, residual, converged)``.
    """
    rho = mp.base.rho
    if step is None:
        step = _multi_step_size(mp)
    x = np.array(check_multi_state(x0), dtype=float)

    def f(v):
        h = multi_willingness(project_multi(v), mp, dist)
        return rho * (np.array(h) - v)

    n_steps = int(math.floor(horizon / step + 1e-9))
    res = math.inf
    for _ in range(n_steps + 1):
        k1 = f(x)
        res = float(np.max(np.abs(k1))) / rho
        if not math.isfinite(res):
            raise NumericalFailure(f"non-finite residual at {x}")
        if res < tol:
            return MultiState(*map(float, x)), res, True
        k2 = f(np.array(project_multi(x + 0.5 * step * k1)))
        k3 = f(np.array(project_multi(x + 0.5 * step * k2)))
        k4 = f(np.array(project_multi(x + step * k3)))
        x = np.array(project_multi(x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)))
    return MultiState(*map(float, x)), res, False


def newton_polish_multi(state, mp: MultiParams, dist=UNIFORM, max_iter: int = 20, fd_step: float = 1e-7):
    """Newton steps on ``H(x) - x`` with a one-sided finite-difference Jacobian.

    Willingness is piecewise smooth in the state, so inside one piece the
    difference quotient is accurate; a step is kept only when it lowers
    the residual.
    """
    x = np.array(state, dtype=float)
    g = np.array(multi_willingness(project_multi(x), mp, dist)) - x
    res = float(np.max(np.abs(g)))
    for _ in range(max_iter):
        if res == 0.0:
            break
        jac = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            # step away from the simplex faces so the probe stays feasible
            e[j] = fd_step if x.sum() + fd_step <= 1.0 else -fd_step
            xp = x + e
            if xp[j] < 0:
                xp[j] = x[j]
                e[j] = 0.0
            if e[j] == 0.0:
                jac[:, j] = -np.eye(3)[j]
                continue
            gp = np.array(multi_willingness(project_multi(xp), mp, dist)) - xp
            jac[:, j] = (gp - g) / e[j]
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        xn = np.array(project_multi(x + step))
        gn = np.array(multi_willingness(project_multi(xn), mp, dist)) - xn
        rn = float(np.max(np.abs(gn)))
        if not rn < res:
            break
        x, g, res = xn, gn, rn
    return MultiState(*map(float, x)), res


def multi_equilibrium(mp: MultiParams, dist=UNIFORM, starts=MULTI_STARTS, tol: float = 1e-9,
                      agreement_tol: float = 1e-6, horizon: float = 2000.0) -> MultiEquilibrium:
    """Integrate from every start and report the spread of endpoints.

    Uniqueness is not known for this model, so disagreement is reported in
    ``agree`` rather than raised.  Starts that fail to converge within
    ``horizon`` are reported through ``converged``.
    """
    ends, residuals, ok = [], [], True
    for s in starts:
        # coarse integration, then polish to the target tolerance
        end, res, conv = integrate_multi(s, mp, dist, horizon=horizon, tol=max(tol, 1e-4))
        end, res = newton_polish_multi(end, mp, dist)
        if res >= tol:
            end, res, conv = integrate_multi(end, mp, dist, horizon=horizon, tol=tol)
        conv = res < tol
        ends.append(end)
        residuals.append(res)
        ok = ok and conv
    pts = np.array(ends)
    spread = float(np.abs(pts[:, None, :] - pts[None, :, :]).max()) if len(pts) > 1 else 0.0
    best = int(np.argmin(residuals))
    return MultiEquilibrium(ends[best], residuals[best], ok, [tuple(e) for e in ends], residuals,
                            spread, spread <= agreement_tol)
