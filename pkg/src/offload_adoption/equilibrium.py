"""Equilibrium adoption levels.

For linear congestion and uniform valuations every region of the adoption
simplex has an affine willingness map, hence a closed-form candidate
equilibrium valid under a set of linear price constraints.  The candidate
table below is written once in array form so the same code serves single
evaluations and the price/coverage grid searches in :mod:`.pricing`.
Non-uniform valuations and nonlinear congestion go through a damped
fixed-point iteration with an ODE fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import (
    CONVERGENCE_TOL,
    SIMPLEX_STARTS,
    StabilityReport,
    integrate,
    jacobian,
    max_pairwise_distance,
    willingness_jacobian,
)
from .errors import DomainError, ModelInconsistencyError, NumericalFailure
from .model import (
    REGIONS,
    AdoptionState,
    Linear,
    ModelParams,
    Uniform,
    default_models,
    project_to_simplex,
    region_of,
    thresholds,
    willingness_from_thresholds,
)

MARGIN_TOL = 1e-9
# polynomial degree (in monetary units) of each row's constraints, used to scale margins
_DEGREES = {
    "a": (1, 1),
    "b": (2, 1, 1),
    "c": (2, 2, 2),
    "d": (1, 1, 1),
    "e": (1, 1, 2),
    "f": (1, 1),
    "g": (1, 1),
}


@dataclass
class Equilibrium:
    state: AdoptionState
    region: str
    method: str  # "closed_form" | "fixed_point"
    residual: float
    constraint_report: dict = field(default_factory=dict)
    stability: Optional[StabilityReport] = None
    starts: list = field(default_factory=list)
    endpoints: list = field(default_factory=list)
    agreement: float = 0.0

    @property
    def x1(self) -> float:
        return self.state.x1

    @property
    def x12(self) -> float:
        return self.state.x12

    @property
    def total(self) -> float:
        return self.state.x1 + self.state.x12


def candidate_rows(q1, q2, g1, g2, eta, p, delta):
    """Per-region candidate equilibria and constraint margins.

    Arguments broadcast as numpy arrays.  Returns ``{label: (x1, x12,
    [margins])}``; a margin is positive when its inequality holds.  Rows
    whose formulas are undefined come back as NaN.
    """
    q1, q2, g1, g2, eta, p, delta = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (q1, q2, g1, g2, eta, p, delta))
    )
    one = np.ones_like(q1)
    zero = np.zeros_like(q1)
    m = 1.0 - eta
    Q = m * q1 + eta * q2
    pd = p + delta
    rows = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        rows["a"] = (zero, one, [
            -(m * m) * g1 - eta * eta * g2 - pd,
            eta * (m * g1 - eta * g2) - delta,
        ])

        den_b = eta * (q1 - q2) - eta * eta * (g1 + g2)
        rows["b"] = (
            (eta * (m * g1 - eta * g2) - delta) / den_b,
            (delta - eta * g1 + eta * (q1 - q2)) / den_b,
            [
                -eta * g1 * g2 + m * g1 * (q1 - q2) - ((eta * (g1 + g2) - q1 + q2) * p + g1 * delta),
                delta - eta * (m * g1 - eta * g2),
                eta * (g1 + q2 - q1) - delta,
            ],
        )

        den_c = -g1 * q2 - eta * g1 * g2 + q1 * (m * g1 - eta * g2 + q1 - q2)
        lhs1 = p * (eta * g2 - m * g1 + q2 - q1) + delta * (-m * g1 - q1) / eta
        lhs2 = p * g1 + delta * (g1 + q1) / eta
        rows["c"] = (
            (-eta * g2 * q1 + m * g1 * q2 + lhs1) / den_c,
            (-g1 * q2 + q1 * (q1 - q2) + lhs2) / den_c,
            [
                eta * g2 * q1 - m * g1 * q2 - lhs1,
                g1 * q2 - q1 * (q1 - q2) - lhs2,
                p * (eta * g2 + eta * g1 + q2 - q1) + delta * g1 - (-eta * g1 * g2 + m * g1 * (q1 - q2)),
            ],
        )

        rows["d"] = ((q1 - p) / (q1 + g1), zero, [
            p + g1,
            q1 - p,
            delta + eta * g1 * p / (q1 + g1) - eta * (q2 - q1 + g1 * q1 / (q1 + g1)),
        ])

        den_e = Q + m * m * g1 + eta * eta * g2
        rows["e"] = (zero, (Q - pd) / den_e, [
            pd + m * m * g1 + eta * eta * g2,
            Q - pd,
            eta * (q2 - q1 - m * g1 + eta * g2) * p - (q1 + m * g1) * delta
            - (eta * eta * q1 * g2 - eta * m * g1 * q2),
        ])

        rows["f"] = (one, zero, [-g1 - p, delta - eta * (q2 + g1 - q1)])
        rows["g"] = (zero, zero, [p - q1, pd - Q])

    # eta == 0: the bundle equals the base at price p + delta
    degenerate = eta == 0.0
    nan = np.full_like(q1, np.nan)
    allowed = {
        "a": ~degenerate | (delta < 0),
        "b": ~degenerate,
        "c": ~degenerate,
        "d": ~degenerate | (delta >= 0),
        "e": ~degenerate | (delta < 0),
        "f": ~degenerate | (delta >= 0),
        "g": np.ones_like(degenerate),
    }
    for label, (x1, x12, margins) in rows.items():
        ok = allowed[label]
        rows[label] = (
            np.where(ok, x1, nan),
            np.where(ok, x12, nan),
            [np.where(ok, mg, nan) for mg in margins],
        )
    return rows


def _scale(q1, q2, g1, g2, p, delta):
    return np.maximum(1.0, np.abs(q1) + np.abs(q2) + np.abs(g1) + np.abs(g2) + np.abs(p) + np.abs(delta))


def scaled_margins(q1, q2, g1, g2, eta, p, delta):
    """Candidate rows with margins divided by a common scale raised to the constraint degree."""
    rows = candidate_rows(q1, q2, g1, g2, eta, p, delta)
    s = _scale(*np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q1, q2, g1, g2, p, delta))))
    out = {}
    for label, (x1, x12, margins) in rows.items():
        out[label] = (x1, x12, [mg / s ** k for mg, k in zip(margins, _DEGREES[label])])
    return out


def closed_form_arrays(q1, q2, g1, g2, eta, p, delta, tol: float = MARGIN_TOL):
    """Vectorized closed-form equilibrium.

    Returns ``(x1, x12, region_index)``; the first satisfied row in
    alphabetical order wins (adjacent rows coincide on shared boundaries).
    ``region_index`` is -1 where no row is satisfied.
    """
    rows = scaled_margins(q1, q2, g1, g2, eta, p, delta)
    shape = rows["a"][0].shape
    x1 = np.full(shape, np.nan)
    x12 = np.full(shape, np.nan)
    idx = np.full(shape, -1, dtype=int)
    for k, label in enumerate(REGIONS):
        rx1, rx12, margins = rows[label]
        sat = np.minimum.reduce(margins) >= -tol
        sat &= np.isfinite(rx1) & np.isfinite(rx12)
        take = sat & (idx < 0)
        x1 = np.where(take, rx1, x1)
        x12 = np.where(take, rx12, x12)
        idx = np.where(take, k, idx)
    return x1, x12, idx


def closed_form_equilibrium(params: ModelParams, tol: float = MARGIN_TOL, with_stability: bool = True) -> Equilibrium:
    """Unique closed-form equilibrium for linear congestion and uniform valuations.

    Every row's constraints are evaluated; exactly one point must survive.
    Several satisfied rows are accepted only when they name the same point
    (a shared region boundary), in which case the earliest label is used.
    """
    P = params
    rows = scaled_margins(P.q1, P.q2, P.gamma1, P.gamma2, P.eta, P.p, P.delta)
    report = {}
    satisfied = []
    for label in REGIONS:
        x1, x12, margins = rows[label]
        mg = [float(v) for v in margins]
        point = (float(x1), float(x12))
        ok = all(math.isfinite(v) for v in point) and all(v >= -tol for v in mg)
        report[label] = {"point": point, "margins": mg, "min_margin": min(mg), "satisfied": ok}
        if ok:
            satisfied.append(label)
    if not satisfied:
        raise ModelInconsistencyError("no closed-form row satisfies its constraints", report)
    first = report[satisfied[0]]["point"]
    for label in satisfied[1:]:
        other = report[label]["point"]
        if max(abs(first[0] - other[0]), abs(first[1] - other[1])) > 1e-7:
            raise ModelInconsistencyError(
                f"rows {satisfied} are all satisfied with distinct equilibria", report
            )
    state = project_to_simplex(*first)
    res = _residual(state, P, None, None, None)
    eq = Equilibrium(state, satisfied[0], "closed_form", res, report)
    eq.constraint_report["satisfied_rows"] = satisfied
    if with_stability:
        eq.stability = jacobian(state, P)
    return eq


def _residual(state, params, t1, t2, dist):
    t1, t2, dist = default_models(params, t1, t2, dist)
    h1, h12 = willingness_from_thresholds(thresholds(state, params, t1, t2), dist)
    return max(abs(h1 - state[0]), abs(h12 - state[1]))


# ---------------------------------------------------------------------------
# general solver
# ---------------------------------------------------------------------------

def damped_iteration(x0, params, t1, t2, dist, damping=0.5, tol=CONVERGENCE_TOL,
                     max_iter=100_000, stall=2_000):
    """``x <- (1 - damping) x + damping H(x)``.

    Returns ``(state, residual, converged)``.  Gives up early when the
    residual has not improved for ``stall`` iterations (a boundary cycle
    or an overshooting contraction), leaving the caller to fall back.
    """
    a, b = x0
    best = math.inf
    since_best = 0
    for _ in range(max_iter):
        h1, h12 = willingness_from_thresholds(thresholds((a, b), params, t1, t2), dist)
        res = max(abs(h1 - a), abs(h12 - b))
        if not math.isfinite(res):
            raise NumericalFailure(f"non-finite residual at ({a}, {b})")
        if res < tol:
            return AdoptionState(a, b), res, True
        if res < best * (1 - 1e-12):
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best > stall:
                break
        a, b = project_to_simplex(a + damping * (h1 - a), b + damping * (h12 - b))
    return AdoptionState(a, b), res, False


def newton_polish(state, params, t1, t2, dist, max_iter=20):
    """Newton steps on ``H(x) - x`` using the one-sided Jacobian of the current region.

    A step is kept only if it lowers the residual, so the polish can never
    make a converged point worse.  Regions with flat willingness (a, f, g)
    and saturated coordinates land exactly on the fixed point in one step.
    """
    a, b = state
    h1, h12 = willingness_from_thresholds(thresholds((a, b), params, t1, t2), dist)
    res = max(abs(h1 - a), abs(h12 - b))
    for _ in range(max_iter):
        if res == 0.0:
            break
        dh, _, _ = willingness_jacobian((a, b), params, t1, t2, dist)
        m = dh - np.eye(2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if not math.isfinite(det) or abs(det) < 1e-14:
            break
        g = np.array([h1 - a, h12 - b])
        step = np.linalg.solve(m, -g)
        na, nb = project_to_simplex(a + step[0], b + step[1])
        n1, n12 = willingness_from_thresholds(thresholds((na, nb), params, t1, t2), dist)
        nres = max(abs(n1 - na), abs(n12 - nb))
        if not nres < res:
            break
        a, b, h1, h12, res = na, nb, n1, n12, nres
    return AdoptionState(a, b), res


def _solve_from(x0, params, t1, t2, dist, damping, tol):
    state, _, ok = damped_iteration(x0, params, t1, t2, dist, damping, tol)
    if not ok:
        traj = integrate(x0, params, t1, t2, dist, tol=tol)
        if not traj.converged:
            raise NumericalFailure(
                f"no convergence from {tuple(x0)}: residual {traj.final_residual:.3e}"
            )
        state = traj.final
    return newton_polish(state, params, t1, t2, dist)


def solve_fixed_point(
    params: ModelParams,
    t1=None,
    t2=None,
    dist=None,
    x0=(0.25, 0.25),
    damping: float = 0.5,
    tol: float = CONVERGENCE_TOL,
    certify: bool = True,
    agreement_tol: float = 1e-6,
) -> Equilibrium:
    """Equilibrium for arbitrary congestion models and valuation distributions.

    With ``certify`` the solve is repeated from nine simplex starts and the
    spread of the endpoints is reported in ``agreement``.  A spread above
    ``agreement_tol`` raises :class:`ModelInconsistencyError` listing every
    endpoint.
    """
    t1, t2, dist = default_models(params, t1, t2, dist)
    state, res = _solve_from(x0, params, t1, t2, dist, damping, tol)
    eq = Equilibrium(state, "", "fixed_point", res)
    th = thresholds(state, params, t1, t2)
    eq.region = region_of(th)
    if certify:
        ends = [state]
        for s in SIMPLEX_STARTS:
            end, _ = _solve_from(s, params, t1, t2, dist, damping, tol)
            ends.append(end)
        eq.starts = [tuple(x0)] + [tuple(s) for s in SIMPLEX_STARTS]
        eq.endpoints = [tuple(e) for e in ends]
        eq.agreement = max_pairwise_distance(ends)
        if eq.agreement > agreement_tol:
            raise ModelInconsistencyError(
                f"multi-start endpoints disagree by {eq.agreement:.3e}",
                {"starts": eq.starts, "endpoints": eq.endpoints},
            )
    eq.stability = jacobian(state, params, t1, t2, dist)
    return eq


def solve(params: ModelParams, t1=None, t2=None, dist=None, **kw) -> Equilibrium:
    """Closed form when the model is linear-uniform, fixed point otherwise."""
    linear = (t1 is None or isinstance(t1, Linear)) and (t2 is None or isinstance(t2, Linear))
    if linear and (dist is None or isinstance(dist, Uniform)):
        if t1 is not None and t1.gamma != params.gamma1 or t2 is not None and t2.gamma != params.gamma2:
            params = params.with_(
                gamma1=params.gamma1 if t1 is None else t1.gamma,
                gamma2=params.gamma2 if t2 is None else t2.gamma,
            )
        return closed_form_equilibrium(params)
    return solve_fixed_point(params, t1, t2, dist, **kw)


# ---------------------------------------------------------------------------
# linearization of the log-Markov congestion curve
# ---------------------------------------------------------------------------

def lin_error_bound(r0: float, nu: float) -> float:
    """Taylor-remainder bound ``r0 nu^2 / (8 (1 - nu))`` on the linearization error."""
    if not 0.0 < nu < 1.0:
        raise DomainError("nu must lie in (0, 1)")
    return r0 * nu * nu / (8.0 * (1.0 - nu))


def _markov_throughput(r0, nu, x):
    u = nu * np.asarray(x, dtype=float)
    return -r0 * (1.0 - u) * np.log1p(-u) / u


def lin_error_scan(r0: float, nu: float, method: str = "lstsq", n: int = 200_001) -> float:
    """Largest deviation on ``(0, 1)`` between the expected-throughput curve and a line.

    ``method="lstsq"`` uses the least-squares line over the interval;
    ``method="tangent"`` uses the tangent at ``x = 0.5``.
    """
    if not 0.0 < nu < 1.0:
        raise DomainError("nu must lie in (0, 1)")
    x = np.linspace(0.0, 1.0, n)[1:-1]
    y = _markov_throughput(r0, nu, x)
    if method == "lstsq":
        A = np.column_stack([x, np.ones_like(x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        line = A @ coef
    elif method == "tangent":
        h = 1e-5
        y0 = float(_markov_throughput(r0, nu, 0.5))
        slope = float((_markov_throughput(r0, nu, 0.5 + h) - _markov_throughput(r0, nu, 0.5 - h)) / (2 * h))
        line = y0 + slope * (x - 0.5)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.max(np.abs(y - line)))
