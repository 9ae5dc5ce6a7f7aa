"""Adoption dynamics ``x' = rho * (H(x) - x)`` and their local stability."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .model import (
    REGIONS,
    TIE_TOL,
    AdoptionState,
    ModelParams,
    base_load,
    check_state,
    default_models,
    project_to_simplex,
    region_of,
    thresholds,
    willingness_from_thresholds,
)

CONVERGENCE_TOL = 1e-9

# vertices and edge midpoints of the adoption simplex, plus three interior points
SIMPLEX_STARTS = (
    (0.0, 0.0), (1.0, 0.0), (0.0, 1.0),
    (0.5, 0.0), (0.0, 0.5), (0.5, 0.5),
    (1 / 6, 1 / 6), (2 / 3, 1 / 6), (1 / 6, 2 / 3),
)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    converged: bool
    final_residual: float
    max_excursion: float = 0.0

    @property
    def final(self) -> AdoptionState:
        return AdoptionState(float(self.states[-1, 0]), float(self.states[-1, 1]))


@dataclass
class StabilityReport:
    jacobian: np.ndarray
    eigenvalues: tuple
    asymptotically_stable: bool
    region: str
    on_boundary: bool = False


def residual(state, params, t1=None, t2=None, dist=None) -> float:
    """Max-norm of ``H(x) - x``."""
    t1, t2, dist = default_models(params, t1, t2, dist)
    h1, h12 = willingness_from_thresholds(thresholds(state, params, t1, t2), dist)
    return max(abs(h1 - state[0]), abs(h12 - state[1]))


def lipschitz_bound(params: ModelParams, t1, t2, dist) -> float:
    """Crude upper bound on the sup-norm of the Jacobian of ``H``."""
    s1, s2 = t1.max_slope(), t2.max_slope()
    eta = params.eta
    d10 = s1 / params.q1
    d120 = ((1 - eta) * s1 + eta * eta * s2) / params.bundle_quality
    d121 = (s1 + eta * s2) / (params.q2 - params.q1) if eta > 0 else 0.0
    fmax = min(dist.max_density(), 50.0)
    return 2.0 * fmax * (d10 + d120 + d121)


def default_step(params: ModelParams, t1, t2, dist) -> float:
    """Nominal ``0.05 / rho``, shortened when ``H`` is steep so RK4 stays stable."""
    return min(0.05, 1.0 / (1.0 + lipschitz_bound(params, t1, t2, dist))) / params.rho


def integrate(
    x0,
    params: ModelParams,
    t1=None,
    t2=None,
    dist=None,
    horizon: float = 2000.0,
    step: float | None = None,
    tol: float = CONVERGENCE_TOL,
    stop_on_convergence: bool = True,
) -> Trajectory:
    """Fixed-step classical RK4 on the adoption dynamics.

    Each accepted state is clipped back onto the simplex; the largest
    pre-clip excursion is kept in ``Trajectory.max_excursion``.
    """
    t1, t2, dist = default_models(params, t1, t2, dist)
    x = check_state(x0)
    if step is None:
        step = default_step(params, t1, t2, dist)
    if not step > 0 or horizon < step:
        raise ValueError("need step > 0 and horizon >= step")
    rho = params.rho

    def f(a, b):
        h1, h12 = willingness_from_thresholds(thresholds((a, b), params, t1, t2), dist)
        return rho * (h1 - a), rho * (h12 - b)

    def safe_state(a, b):
        return AdoptionState(min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)) if a + b <= 1 else project_to_simplex(a, b)

    times = [0.0]
    states = [tuple(x)]
    t = 0.0
    excursion = 0.0
    n_steps = int(math.floor(horizon / step + 1e-9))
    converged = False
    res = math.inf
    a, b = x
    for _ in range(n_steps + 1):
        k1 = f(a, b)
        res = max(abs(k1[0]), abs(k1[1])) / rho
        if not math.isfinite(res):
            raise NumericalFailure(f"non-finite residual at t={t}, state=({a}, {b})")
        if res < tol:
            converged = True
            if stop_on_convergence:
                break
        if len(times) > n_steps:
            break
        s = safe_state(a + 0.5 * step * k1[0], b + 0.5 * step * k1[1])
        k2 = f(*s)
        s = safe_state(a + 0.5 * step * k2[0], b + 0.5 * step * k2[1])
        k3 = f(*s)
        s = safe_state(a + step * k3[0], b + step * k3[1])
        k4 = f(*s)
        na = a + step / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        nb = b + step / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        excursion = max(excursion, -na, -nb, na + nb - 1.0)
        a, b = project_to_simplex(na, nb)
        t += step
        times.append(t)
        states.append((a, b))
    return Trajectory(np.array(times), np.array(states), converged, res, excursion)


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------

def _threshold_gradients(state, params, t1, t2):
    """Gradients of the three thresholds with respect to ``(x1, x12)``."""
    eta = params.eta
    d1 = t1.derivative(base_load(state, eta))
    d2 = t2.derivative(eta * state[1])
    dload = (1.0, 1.0 - eta)
    g10 = (-d1 * dload[0] / params.q1, -d1 * dload[1] / params.q1)
    Q = params.bundle_quality
    g120 = (
        -(1 - eta) * d1 * dload[0] / Q,
        (-(1 - eta) * d1 * dload[1] - eta * d2 * eta) / Q,
    )
    if eta > 0:
        dq = params.q1 - params.q2
        g121 = ((-d1 * dload[0]) / dq, (d2 * eta - d1 * dload[1]) / dq)
    else:
        g121 = (0.0, 0.0)
    return g10, g121, g120


def _on_boundary(th, region, tol) -> bool:
    vals = [th.theta_1_0, th.theta_12_1, th.theta_12_0]
    finite = [v for v in vals if math.isfinite(v)]
    for v in finite:
        if abs(v) < tol or abs(v - 1.0) < tol:
            return True
    for i in range(len(finite)):
        for j in range(i + 1, len(finite)):
            if abs(finite[i] - finite[j]) < tol:
                return region not in ("a", "f", "g")
    return False


def eig2(m) -> tuple:
    """Eigenvalues of a 2x2 matrix from its characteristic polynomial."""
    tr = m[0][0] + m[1][1]
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    disc = cmath.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    if abs(l1.imag) == 0.0 and abs(l2.imag) == 0.0:
        # sort real pairs descending for stable reporting
        l1, l2 = sorted((l1, l2), key=lambda z: -z.real)
    return l1, l2


def willingness_jacobian(state, params, t1=None, t2=None, dist=None, region=None):
    """One-sided Jacobian of ``(h1, h12)`` on the region containing ``state``."""
    t1, t2, dist = default_models(params, t1, t2, dist)
    state = check_state(state)
    th = thresholds(state, params, t1, t2)
    if region is None:
        region = region_of(th)
    g10, g121, g120 = _threshold_gradients(state, params, t1, t2)

    def dens(t):
        return dist.pdf(min(max(t, 0.0), 1.0))

    zero = (0.0, 0.0)
    if region in ("a", "f", "g"):
        dh1, dh12 = zero, zero
    elif region == "b":
        f = dens(th.theta_12_1)
        dh1 = (f * g121[0], f * g121[1])
        dh12 = (-dh1[0], -dh1[1])
    elif region == "c":
        f121, f10 = dens(th.theta_12_1), dens(th.theta_1_0)
        dh1 = (f121 * g121[0] - f10 * g10[0], f121 * g121[1] - f10 * g10[1])
        dh12 = (-f121 * g121[0], -f121 * g121[1])
    elif region == "d":
        f = dens(th.theta_1_0)
        dh1 = (-f * g10[0], -f * g10[1])
        dh12 = zero
    elif region == "e":
        f = dens(th.theta_12_0)
        dh1 = zero
        dh12 = (-f * g120[0], -f * g120[1])
    else:
        raise ValueError(f"unknown region {region!r}")
    return np.array([dh1, dh12]), region, th


def jacobian(state, params: ModelParams, t1=None, t2=None, dist=None) -> StabilityReport:
    """Jacobian of the dynamics (including ``rho``) and its spectrum."""
    dh, region, th = willingness_jacobian(state, params, t1, t2, dist)
    jac = params.rho * (dh - np.eye(2))
    eigs = eig2(jac)
    stable = all(z.real < 0 for z in eigs)
    return StabilityReport(jac, eigs, stable, region, _on_boundary(th, region, TIE_TOL))


# ---------------------------------------------------------------------------
# Bendixson divergence check
# ---------------------------------------------------------------------------

@dataclass
class DivergenceReport:
    max_divergence: float
    by_region: dict = field(default_factory=dict)
    samples: int = 0
    passed: bool = True


def divergence_check(params: ModelParams, t1=None, t2=None, samples: int = 200, dist=None, seed: int = 0) -> DivergenceReport:
    """Divergence ``df1/dx1 + df2/dx12`` at random interior points of each region present."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    t1, t2, dist = default_models(params, t1, t2, dist)
    rng = np.random.default_rng(seed)
    by_region = {}
    used = 0
    attempts = 0
    while used < samples and attempts < 50 * samples:
        attempts += 1
        u, v = rng.random(2)
        if u + v > 1:
            u, v = 1 - u, 1 - v
        th = thresholds((u, v), params, t1, t2)
        region = region_of(th)
        if _on_boundary(th, region, 1e-6):
            continue
        rep = jacobian((u, v), params, t1, t2, dist)
        div = float(np.trace(rep.jacobian))
        by_region[region] = max(by_region.get(region, -math.inf), div)
        used += 1
    worst = max(by_region.values()) if by_region else math.nan
    return DivergenceReport(worst, dict(sorted(by_region.items())), used, bool(by_region) and worst < 0)


def multi_start(params, t1=None, t2=None, dist=None, starts=SIMPLEX_STARTS, **kw):
    """Integrate from every start; returns the list of trajectories."""
    return [integrate(s, params, t1, t2, dist, **kw) for s in starts]


def max_pairwise_distance(points) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.abs(diff).max())


__all__ = [
    "REGIONS",
    "SIMPLEX_STARTS",
    "Trajectory",
    "StabilityReport",
    "DivergenceReport",
    "integrate",
    "jacobian",
    "willingness_jacobian",
    "divergence_check",
    "residual",
    "multi_start",
    "max_pairwise_distance",
    "eig2",
]
