"""Command-line driver for the adoption model and its operator optimizers.

Exit codes: 0 success, 1 verification failure, 2 bad input, 3 model
inconsistency, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .dynamics import integrate
from .errors import DomainError, ModelInconsistencyError, NumericalFailure, ParameterError
from .model import thresholds
from .pricing import CITIES, estimate_costs, round_sig
from .scenario import (
    ScenarioError,
    cost_sweep_report,
    equilibrium_row,
    load_scenario,
    multi_row,
    optimize_row,
    run_scenario,
)
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_INCONSISTENT, EXIT_NUMERICAL = 0, 1, 2, 3, 4


def fmt(value) -> str:
    """Fixed 12-significant-digit text for numbers, lowercase booleans."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0.0:
            return "0"  # drop the sign of negative zero
        return format(v, ".12g")
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if not math.isfinite(v):
            return fmt(v)
        return float(fmt(v))
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def render(columns, rows, fmt_name: str, meta=None) -> str:
    if fmt_name == "json":
        doc = {"columns": list(columns), "rows": [{c: _json_value(r[c]) for c in columns} for r in rows]}
        if meta:
            doc["meta"] = _json_value(meta)
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _need_scenario(args):
    if not args.scenario:
        raise ScenarioError(f"{args.command} needs --scenario")
    return load_scenario(args.scenario)


def _figure(args, rows, variable, title, columns=("x1", "x12", "total")):
    if getattr(args, "figure", None):
        from .plotting import plot_sweep

        plot_sweep(rows, variable, args.figure, title, columns)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_equilibrium(args):
    sc = _need_scenario(args)
    row = equilibrium_row(sc, sc.model)
    th = thresholds((row["x1"], row["x12"]), sc.model, *sc.congestion())
    row.update(theta_1_0=th.theta_1_0, theta_12_1=th.theta_12_1, theta_12_0=th.theta_12_0)
    cols = ("x1", "x12", "total", "region", "revenue", "residual", "stable",
            "theta_1_0", "theta_12_1", "theta_12_0")
    return render(cols, [row], args.format), EXIT_OK


def cmd_simulate(args):
    sc = _need_scenario(args)
    x0 = tuple(args.x0) if args.x0 else sc.x0
    horizon = args.horizon if args.horizon is not None else sc.horizon
    t1, t2 = sc.congestion()
    traj = integrate(x0, sc.model, t1, t2, sc.valuation(), horizon=horizon, stop_on_convergence=False)
    stride = max(1, int(args.every))
    idx = list(range(0, len(traj.times), stride))
    if idx[-1] != len(traj.times) - 1:
        idx.append(len(traj.times) - 1)
    rows = [{"t": traj.times[i], "x1": traj.states[i, 0], "x12": traj.states[i, 1]} for i in idx]
    meta = {"converged": traj.converged, "final_residual": traj.final_residual}
    return render(("t", "x1", "x12"), rows, args.format, meta if args.format == "json" else None), EXIT_OK


def _sweep_output(args, sc):
    columns, rows = run_scenario(sc)
    meta = {"scenario": sc.to_dict()}
    variable = sc.sweep.variable if sc.sweep else "point"
    if sc.objective == "profit" and sc.sweep and sc.sweep.variable in ("c_wf", "c_ap") and not sc.fix_eta:
        report = cost_sweep_report(rows, sc.sweep.variable)
        meta["cost_sweep"] = report
        if args.format == "csv":
            trend = "non-increasing" if sc.sweep.variable == "c_ap" else "non-decreasing"
            print(f"# coverage {trend}: {fmt(report['coverage_monotone'])}; "
                  f"bundle adoption rises while coverage falls on {len(report['adoption_rises_as_coverage_falls'])} "
                  "interval(s)", file=sys.stderr)
    figure_cols = ("x1", "x12", "x3", "total") if sc.multi is not None else ("x1", "x12", "total")
    _figure(args, rows, variable, sc.name, figure_cols)
    return render(columns, rows, args.format, meta if args.format == "json" else None), EXIT_OK


def cmd_sweep(args):
    sc = _need_scenario(args)
    if sc.sweep is None:
        raise ScenarioError("sweep needs a [sweep] section")
    return _sweep_output(args, sc)


def cmd_run(args):
    return _sweep_output(args, _need_scenario(args))


def cmd_optimize(args):
    sc = _need_scenario(args)
    if sc.objective is None:
        sc = type(sc)(**{**sc.__dict__, "objective": "revenue"})
    row = optimize_row(sc, sc.model, sc.cost_params())
    cols = ("p_star", "delta_star", "eta_star", "x1", "x12", "total", "region", "objective", "residual", "stable")
    return render(cols, [row], args.format), EXIT_OK


def cmd_cost(args):
    names = [args.city] if args.city else sorted(CITIES)
    rows = []
    for name in names:
        if name not in CITIES:
            raise ScenarioError(f"unknown city {name!r}")
        c = estimate_costs(CITIES[name])
        rows.append({"city": name, "c_wf": c.c_wf, "c_ap": c.c_ap,
                     "c_wf_2sf": round_sig(c.c_wf), "c_ap_2sf": round_sig(c.c_ap)})
    return render(("city", "c_wf", "c_ap", "c_wf_2sf", "c_ap_2sf"), rows, args.format), EXIT_OK


def cmd_multiwsp(args):
    sc = _need_scenario(args)
    if sc.multi is None:
        raise ScenarioError("multiwsp needs a [multi] section")
    if sc.sweep is not None:
        return _sweep_output(args, sc)
    row = multi_row(sc, sc.model)
    cols = ("x1", "x12", "x3", "total", "family", "agreement", "agree", "converged", "residual")
    return render(cols, [row], args.format), EXIT_OK


def cmd_verify(args):
    names = SUITES if args.suite == "all" else (args.suite,)
    seed = args.seed if args.seed is not None else 0
    rows, failures = [], []
    for name in names:
        rep = run_suite(name, args.draws, seed)
        rows.append({"suite": name, "draws": rep.draws, "passed": rep.passed, "failed": rep.failed,
                     "worst": rep.worst, "worst_metric": rep.worst_label})
        for f in rep.failures:
            failures.append({"suite": name, **f})
    cols = ("suite", "draws", "passed", "failed", "worst", "worst_metric")
    text = render(cols, rows, args.format, {"seed": seed, "failures": failures} if args.format == "json" else None)
    if failures and args.format == "csv":
        # failing draws go to stderr as JSON lines for replay
        for f in failures:
            print(json.dumps(_json_value(f), sort_keys=True), file=sys.stderr)
    return text, EXIT_OK if not failures else EXIT_FAIL


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized verification")
    common.add_argument("--figure", help="also render a PNG of the sweep to this path")

    parser = argparse.ArgumentParser(prog="offload-adoption", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common], help="equilibrium at the scenario's parameters")
    sim = sub.add_parser("simulate", parents=[common], help="adoption trajectory")
    sim.add_argument("--x0", type=float, nargs=2, metavar=("X1", "X12"))
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--every", type=int, default=20, help="emit every n-th step")
    sub.add_parser("sweep", parents=[common], help="equilibria or optima along the [sweep] axis")
    sub.add_parser("optimize", parents=[common], help="revenue- or profit-maximizing decisions")
    cost = sub.add_parser("cost", parents=[common], help="cost parameters for the city profiles")
    cost.add_argument("--city", choices=sorted(CITIES))
    sub.add_parser("multiwsp", parents=[common], help="two-provider equilibrium")
    ver = sub.add_parser("verify", parents=[common], help="seeded property suites")
    ver.add_argument("--suite", choices=SUITES + ("all",), default="all")
    ver.add_argument("--draws", type=int, default=100)
    sub.add_parser("run", parents=[common], help="evaluate a scenario file end to end")
    return parser


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "cost": cmd_cost,
    "multiwsp": cmd_multiwsp,
    "verify": cmd_verify,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify" and args.draws < 1:
            raise ScenarioError("--draws must be >= 1")
        text, code = COMMANDS[args.command](args)
    except (ScenarioError, ParameterError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ModelInconsistencyError as exc:
        print(f"model inconsistency: {exc}", file=sys.stderr)
        if getattr(exc, "details", None):
            print(json.dumps(_json_value(exc.details), sort_keys=True, default=str), file=sys.stderr)
        return EXIT_INCONSISTENT
    except (NumericalFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    emit(text, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
