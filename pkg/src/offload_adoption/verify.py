"""Seeded property suites over random linear/uniform markets.

Each suite returns a :class:`SuiteReport` with pass/fail counts and the
worst margin seen.  Failing draws keep their parameters for replay.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import SIMPLEX_STARTS, integrate, jacobian, max_pairwise_distance
from .equilibrium import closed_form_equilibrium
from .errors import AdoptionError
from .model import ModelParams

SUITES = ("tables", "stability", "uniqueness", "oracle")
AGREEMENT_TOL = 1e-6


def random_params(rng: np.random.Generator) -> ModelParams:
    """A market spanning all seven regions with reasonable frequency."""
    q1 = rng.uniform(20.0, 200.0)
    q2 = q1 + rng.uniform(10.0, 200.0)
    g1 = rng.uniform(5.0, 150.0)
    g2 = rng.uniform(5.0, 150.0)
    eta = rng.uniform(0.05, 1.0)
    rho = rng.uniform(0.2, 1.0)
    p = rng.uniform(-g1 - 20.0, q1 + 20.0)
    delta = rng.uniform(-30.0 * eta - 20.0, eta * (q2 - q1 + g1) + 20.0)
    return ModelParams(q1, q2, g1, g2, eta, p, delta, rho)


def random_draws(n: int, seed: int):
    rng = np.random.default_rng(seed)
    return [random_params(rng) for _ in range(n)]


@dataclass
class SuiteReport:
    suite: str
    draws: int
    passed: int = 0
    failed: int = 0
    worst: float = 0.0
    worst_label: str = ""
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def record(self, ok: bool, params: ModelParams, value: float, info=None):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            self.failures.append({"params": asdict(params), "value": value, "info": info})


def _ode_endpoint(params, start=(0.0, 0.0)):
    traj = integrate(start, params, horizon=5000.0)
    return np.array(traj.final), traj.converged


def suite_tables(draws) -> SuiteReport:
    """Exactly one closed-form point survives its region constraints."""
    rep = SuiteReport("tables", len(draws), worst_label="smallest winning-row margin")
    worst = np.inf
    for params in draws:
        try:
            eq = closed_form_equilibrium(params, with_stability=False)
        except AdoptionError as exc:
            rep.record(False, params, float("nan"), str(exc))
            continue
        margin = eq.constraint_report[eq.region]["min_margin"]
        worst = min(worst, margin)
        rep.record(True, params, margin)
    rep.worst = float(worst)
    return rep


def suite_stability(draws) -> SuiteReport:
    rep = SuiteReport("stability", len(draws), worst_label="largest eigenvalue real part")
    worst = -np.inf
    for params in draws:
        eq = closed_form_equilibrium(params, with_stability=False)
        st = jacobian(eq.state, params)
        top = max(z.real for z in st.eigenvalues)
        worst = max(worst, top)
        rep.record(st.asymptotically_stable, params, top, {"region": eq.region})
    rep.worst = float(worst)
    return rep


def suite_uniqueness(draws) -> SuiteReport:
    rep = SuiteReport("uniqueness", len(draws), worst_label="largest endpoint spread")
    worst = 0.0
    for params in draws:
        ends, conv = zip(*(_ode_endpoint(params, s) for s in SIMPLEX_STARTS))
        spread = max_pairwise_distance(ends)
        worst = max(worst, spread)
        rep.record(spread <= AGREEMENT_TOL and all(conv), params, spread)
    rep.worst = float(worst)
    return rep


def suite_oracle(draws) -> SuiteReport:
    rep = SuiteReport("oracle", len(draws), worst_label="largest closed-form vs ODE gap")
    worst = 0.0
    for params in draws:
        eq = closed_form_equilibrium(params, with_stability=False)
        end, conv = _ode_endpoint(params)
        gap = float(np.max(np.abs(end - np.array(eq.state))))
        worst = max(worst, gap)
        rep.record(gap <= AGREEMENT_TOL and conv, params, gap, {"region": eq.region})
    rep.worst = float(worst)
    return rep


RUNNERS = {
    "tables": suite_tables,
    "stability": suite_stability,
    "uniqueness": suite_uniqueness,
    "oracle": suite_oracle,
}


def run_suite(name: str, draws: int, seed: int) -> SuiteReport:
    if name not in RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    if draws < 1:
        raise ValueError("draws must be >= 1")
    return RUNNERS[name](random_draws(draws, seed))
