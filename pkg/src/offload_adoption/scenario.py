"""Scenario files and the sweep driver.

A scenario is a sectioned ``key = value`` text file (``#`` comments)::

    [model]
    q1 = 200
    q2 = 250
    gamma1 = 50
    gamma2 = 20
    eta = 0.5
    p = 40
    delta = 10

    [sweep]
    variable = eta
    start = 0
    stop = 1
    steps = 101

Optional sections: ``[throughput]`` (``kind = linear | logmarkov`` with
``r1, r2, nu1, nu2``), ``[distribution]`` (``kind = uniform | beta`` with
``alpha, beta``), ``[costs]`` (``city = small | sparse | dense`` or
``c_wf, c_ap``), ``[optimize]`` (``objective = revenue | profit``,
``fix_eta``, ``grid``, ``rounds``), ``[multi]`` (``q3, gamma3, p3``) and
``[run]`` (``seed``, ``x0``, ``horizon``).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dynamics import jacobian, residual
from .equilibrium import closed_form_equilibrium, solve_fixed_point
from .errors import ModelInconsistencyError, NumericalFailure, ParameterError
from .model import UNIFORM, Beta, LogMarkov, ModelParams
from .multiwsp import MultiParams, classify_ordering, multi_equilibrium
from .pricing import (
    CITIES,
    CostParams,
    GridSpec,
    optimize_numeric,
    optimize_profit,
    revenue,
    revenue_max_full,
    revenue_max_prices,
)

SWEEP_VARIABLES = ("eta", "p", "delta", "c_wf", "c_ap")
RESIDUAL_LIMIT = 1e-9


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario file."""


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ScenarioError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if self.steps < 2:
            raise ScenarioError("sweep steps must be >= 2")
        if not self.start < self.stop:
            raise ScenarioError("sweep start must be below stop")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Scenario:
    model: ModelParams
    throughput: dict = field(default_factory=lambda: {"kind": "linear"})
    distribution: dict = field(default_factory=lambda: {"kind": "uniform"})
    costs: Optional[CostParams] = None
    city: Optional[str] = None
    sweep: Optional[SweepSpec] = None
    objective: Optional[str] = None
    fix_eta: bool = True
    grid: int = 51
    rounds: int = 3
    multi: Optional[dict] = None
    seed: int = 0
    x0: tuple = (0.0, 0.0)
    horizon: float = 200.0
    name: str = ""

    # model objects -------------------------------------------------------
    def congestion(self):
        t = self.throughput
        if t["kind"] == "linear":
            return None, None
        return LogMarkov(t["r1"], t["nu1"]), LogMarkov(t["r2"], t["nu2"])

    def valuation(self):
        d = self.distribution
        if d["kind"] == "uniform":
            return UNIFORM
        return Beta(d["alpha"], d["beta"])

    @property
    def closed_form(self) -> bool:
        return self.throughput["kind"] == "linear" and self.distribution["kind"] == "uniform"

    def cost_params(self) -> CostParams:
        return self.costs or CostParams()

    def multi_params(self, model: Optional[ModelParams] = None) -> MultiParams:
        m = self.multi
        return MultiParams(model or self.model, m["q3"], m["gamma3"], m["p3"])

    def to_dict(self) -> dict:
        out = {
            "model": {k: getattr(self.model, k) for k in
                      ("q1", "q2", "gamma1", "gamma2", "eta", "p", "delta", "rho")},
            "throughput": dict(self.throughput),
            "distribution": dict(self.distribution),
            "run": {"seed": self.seed, "x0": list(self.x0), "horizon": self.horizon},
        }
        if self.costs is not None:
            out["costs"] = {"c_wf": self.costs.c_wf, "c_ap": self.costs.c_ap}
            if self.city:
                out["costs"]["city"] = self.city
        if self.sweep is not None:
            s = self.sweep
            out["sweep"] = {"variable": s.variable, "start": s.start, "stop": s.stop, "steps": s.steps}
        if self.objective is not None:
            out["optimize"] = {"objective": self.objective, "fix_eta": self.fix_eta,
                               "grid": self.grid, "rounds": self.rounds}
        if self.multi is not None:
            out["multi"] = {k: (str(v) if v == math.inf else v) for k, v in self.multi.items()}
        return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _num(section, key, default=None, cast=float):
    if key not in section:
        if default is None:
            raise ScenarioError(f"[{section.name}] is missing {key!r}")
        return default
    raw = section[key].strip()
    try:
        value = cast(raw)
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {key} = {raw!r} is not a number") from exc
    return value


def _bool(section, key, default):
    if key not in section:
        return default
    try:
        return section.getboolean(key)
    except ValueError as exc:
        raise ScenarioError(f"[{section.name}] {key} must be true or false") from exc


def scenario_from_dict(data: dict, name: str = "") -> Scenario:
    """Build a scenario from nested ``{section: {key: value}}`` data."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    for sect, values in data.items():
        parser[sect] = {k: (",".join(str(x) for x in v) if isinstance(v, (list, tuple)) else str(v))
                        for k, v in values.items()}
    return _from_parser(parser, name)


def load_scenario(path) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return _from_parser(parser, str(path))


def _from_parser(parser: configparser.ConfigParser, name: str) -> Scenario:
    known = {"model", "throughput", "distribution", "costs", "sweep", "optimize", "multi", "run"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ScenarioError(f"unknown section(s): {sorted(unknown)}")
    if "model" not in parser:
        raise ScenarioError("scenario needs a [model] section")
    m = parser["model"]

    throughput = {"kind": "linear"}
    if "throughput" in parser:
        t = parser["throughput"]
        kind = t.get("kind", "linear").strip()
        if kind == "logmarkov":
            throughput = {"kind": kind, "r1": _num(t, "r1"), "r2": _num(t, "r2"),
                          "nu1": _num(t, "nu1", _num(t, "nu", 0.5)), "nu2": _num(t, "nu2", _num(t, "nu", 0.5))}
        elif kind != "linear":
            raise ScenarioError(f"unknown throughput kind {kind!r}")

    # the linear slopes double as nominal slopes (at zero load) for log-Markov curves
    if throughput["kind"] == "logmarkov":
        g1 = throughput["r1"] * throughput["nu1"] / 2.0
        g2 = throughput["r2"] * throughput["nu2"] / 2.0
    else:
        g1, g2 = _num(m, "gamma1"), _num(m, "gamma2")
    try:
        model = ModelParams(
            _num(m, "q1"), _num(m, "q2"), _num(m, "gamma1", g1), _num(m, "gamma2", g2),
            _num(m, "eta"), _num(m, "p", 0.0), _num(m, "delta", 0.0), _num(m, "rho", 1.0),
        )
        if throughput["kind"] == "logmarkov":
            LogMarkov(throughput["r1"], throughput["nu1"])
            LogMarkov(throughput["r2"], throughput["nu2"])
    except ParameterError as exc:
        raise ScenarioError(str(exc)) from exc

    distribution = {"kind": "uniform"}
    if "distribution" in parser:
        d = parser["distribution"]
        kind = d.get("kind", "uniform").strip()
        if kind == "beta":
            distribution = {"kind": kind, "alpha": _num(d, "alpha"), "beta": _num(d, "beta")}
            try:
                Beta(distribution["alpha"], distribution["beta"])
            except ParameterError as exc:
                raise ScenarioError(str(exc)) from exc
        elif kind != "uniform":
            raise ScenarioError(f"unknown distribution kind {kind!r}")

    costs, city = None, None
    if "costs" in parser:
        c = parser["costs"]
        city = c.get("city", "").strip() or None
        if city is not None:
            if city not in CITIES:
                raise ScenarioError(f"unknown city {city!r}; choose from {sorted(CITIES)}")
            from .pricing import estimate_costs

            base = estimate_costs(CITIES[city])
            costs = CostParams(_num(c, "c_wf", base.c_wf), _num(c, "c_ap", base.c_ap))
        else:
            costs = CostParams(_num(c, "c_wf", 0.0), _num(c, "c_ap", 0.0))

    sweep = None
    if "sweep" in parser:
        s = parser["sweep"]
        sweep = SweepSpec(s.get("variable", "").strip(), _num(s, "start"), _num(s, "stop"),
                          _num(s, "steps", cast=int))

    objective, fix_eta, grid, rounds = None, True, 51, 3
    if "optimize" in parser:
        o = parser["optimize"]
        objective = o.get("objective", "revenue").strip()
        if objective not in ("revenue", "profit"):
            raise ScenarioError("objective must be revenue or profit")
        fix_eta = _bool(o, "fix_eta", True)
        grid = _num(o, "grid", 51, int)
        rounds = _num(o, "rounds", 3, int)
        if grid < 2 or rounds < 0:
            raise ScenarioError("grid must be >= 2 and rounds >= 0")

    multi = None
    if "multi" in parser:
        mu = parser["multi"]
        multi = {"q3": _num(mu, "q3"), "gamma3": _num(mu, "gamma3"), "p3": _num(mu, "p3")}
        try:
            MultiParams(model, multi["q3"], multi["gamma3"], multi["p3"])
        except ParameterError as exc:
            raise ScenarioError(str(exc)) from exc

    seed, x0, horizon = 0, (0.0, 0.0), 200.0
    if "run" in parser:
        r = parser["run"]
        seed = _num(r, "seed", 0, int)
        horizon = _num(r, "horizon", 200.0)
        if "x0" in r:
            try:
                x0 = tuple(float(v) for v in r["x0"].split(","))
            except ValueError as exc:
                raise ScenarioError("x0 must be two comma-separated numbers") from exc
            if len(x0) != 2:
                raise ScenarioError("x0 must be two comma-separated numbers")
    return Scenario(model, throughput, distribution, costs, city, sweep, objective, fix_eta,
                    grid, rounds, multi, seed, x0, horizon, name)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

EQ_COLUMNS = ("value", "x1", "x12", "total", "region", "revenue", "residual", "stable")
OPT_COLUMNS = ("value", "p_star", "delta_star", "eta_star", "x1", "x12", "total", "region",
               "objective", "residual", "stable")
MULTI_COLUMNS = ("value", "x1", "x12", "x3", "total", "family", "agreement", "agree", "converged",
                 "residual")


def _apply(sc: Scenario, variable: Optional[str], value: float):
    model, costs = sc.model, sc.cost_params()
    if variable in ("eta", "p", "delta"):
        model = model.with_(**{variable: float(value)})
    elif variable in ("c_wf", "c_ap"):
        costs = replace(costs, **{variable: float(value)})
    return model, costs


def _certify(state, model, sc: Scenario) -> tuple:
    t1, t2 = sc.congestion()
    dist = sc.valuation()
    res = residual(state, model, t1, t2, dist)
    if not res < RESIDUAL_LIMIT:
        raise NumericalFailure(f"emitted equilibrium {tuple(state)} has residual {res:.3e}")
    stable = jacobian(state, model, t1, t2, dist).asymptotically_stable
    return res, stable


def equilibrium_row(sc: Scenario, model: ModelParams, value=math.nan) -> dict:
    t1, t2 = sc.congestion()
    dist = sc.valuation()
    if sc.closed_form:
        eq = closed_form_equilibrium(model, with_stability=False)
    else:
        eq = solve_fixed_point(model, t1, t2, dist)
    res, stable = _certify(eq.state, model, sc)
    return {"value": value, "x1": eq.x1, "x12": eq.x12, "total": eq.total, "region": eq.region,
            "revenue": revenue(model, eq), "residual": res, "stable": stable}


def optimize_row(sc: Scenario, model: ModelParams, costs: CostParams, value=math.nan) -> dict:
    objective = sc.objective or "revenue"
    fixed = model.eta if sc.fix_eta else None
    if sc.closed_form:
        if objective == "revenue":
            dec = revenue_max_prices(model, fixed) if fixed is not None else revenue_max_full(model)
        else:
            grid = GridSpec(sc.grid, sc.grid, sc.grid, rounds=sc.rounds)
            dec = optimize_profit(model, costs, grid, fixed_eta=fixed)
    else:
        t1, t2 = sc.congestion()
        grid = GridSpec(sc.grid, sc.grid, 1 if fixed is not None else sc.grid, rounds=sc.rounds)
        dec = optimize_numeric(model, t1, t2, sc.valuation(), costs, grid, fixed, objective)
    best = model.with_(p=dec.p_star, delta=dec.delta_star, eta=dec.eta_star)
    res, stable = _certify(dec.adoption, best, sc)
    x1, x12 = dec.adoption
    return {"value": value, "p_star": dec.p_star, "delta_star": dec.delta_star, "eta_star": dec.eta_star,
            "x1": x1, "x12": x12, "total": x1 + x12, "region": dec.region,
            "objective": dec.objective_value, "residual": res, "stable": stable}


def multi_row(sc: Scenario, model: ModelParams, value=math.nan) -> dict:
    mp = sc.multi_params(model)
    eq = multi_equilibrium(mp, sc.valuation())
    try:
        family = classify_ordering(eq.state, mp).family_index if not mp.absent_rival else 0
    except ModelInconsistencyError:
        family = -1
    if not eq.residual < RESIDUAL_LIMIT:
        raise NumericalFailure(f"two-provider equilibrium residual {eq.residual:.3e}")
    x1, x12, x3 = eq.state
    return {"value": value, "x1": x1, "x12": x12, "x3": x3, "total": x1 + x12 + x3, "family": family,
            "agreement": eq.agreement, "agree": eq.agree, "converged": eq.converged,
            "residual": eq.residual}


def run_scenario(sc: Scenario):
    """Evaluate every sweep point (or the single configured point).

    Returns ``(columns, rows)``; rows are in sweep order.
    """
    variable = sc.sweep.variable if sc.sweep else None
    values = sc.sweep.values() if sc.sweep else [math.nan]
    if sc.multi is not None:
        if variable not in (None, "eta", "p", "delta"):
            raise ScenarioError("two-provider sweeps support eta, p and delta only")
        columns = MULTI_COLUMNS
    elif sc.objective is not None:
        columns = OPT_COLUMNS
    else:
        if variable in ("c_wf", "c_ap"):
            raise ScenarioError("cost sweeps need an [optimize] section")
        columns = EQ_COLUMNS
    rows = []
    for v in values:
        model, costs = _apply(sc, variable, v)
        if sc.multi is not None:
            rows.append(multi_row(sc, model, float(v)))
        elif sc.objective is not None:
            rows.append(optimize_row(sc, model, costs, float(v)))
        else:
            rows.append(equilibrium_row(sc, model, float(v)))
    return columns, rows


def cost_sweep_report(rows, variable: str = "c_ap") -> dict:
    """Coverage monotonicity along a cost sweep, and where bundle adoption rises as coverage falls.

    Coverage should not increase with deployment cost (``c_ap``) and should
    not decrease with offloading savings (``c_wf``).
    """
    hits = []
    for a, b in zip(rows[:-1], rows[1:]):
        if b["eta_star"] < a["eta_star"] - 1e-9 and b["x12"] > a["x12"] + 1e-9:
            hits.append((a["value"], b["value"]))
    sign = -1.0 if variable == "c_ap" else 1.0
    monotone = all(sign * (b["eta_star"] - a["eta_star"]) >= -1e-9 for a, b in zip(rows[:-1], rows[1:]))
    return {"variable": variable, "coverage_monotone": monotone,
            "adoption_rises_as_coverage_falls": hits}
