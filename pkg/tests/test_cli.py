import json
import math
from importlib import resources

import pytest

from offload_adoption import cli
from offload_adoption.errors import ModelInconsistencyError, NumericalFailure
from offload_adoption.scenario import (
    ScenarioError,
    cost_sweep_report,
    load_scenario,
    run_scenario,
    scenario_from_dict,
)

MODEL = {"q1": 200, "q2": 250, "gamma1": 50, "gamma2": 20, "eta": 0.5, "p": 40, "delta": 10}


def write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_single_point_run_gives_one_row(tmp_path, capsys):
    path = write(tmp_path, "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items()))
    code, out, _ = run(["run", "--scenario", path], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("value,x1,x12,total,region")
    assert len(lines) == 2


def test_json_output_round_trips(tmp_path, capsys):
    path = write(tmp_path, "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items())
                 + "\n[sweep]\nvariable = eta\nstart = 0\nstop = 1\nsteps = 5\n")
    code, out, _ = run(["sweep", "--scenario", path, "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert [r["value"] for r in doc["rows"]] == [0.0, 0.25, 0.5, 0.75, 1.0]
    again, orig = scenario_from_dict(doc["meta"]["scenario"]), load_scenario(path)
    assert again.model == orig.model and again.sweep == orig.sweep


def test_cost_command(capsys):
    code, out, _ = run(["cost", "--city", "sparse"], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "city,c_wf,c_ap,c_wf_2sf,c_ap_2sf"
    assert row.startswith("sparse,")


def test_simulate_and_equilibrium(tmp_path, capsys):
    path = write(tmp_path, "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items()))
    code, out, _ = run(["simulate", "--scenario", path, "--horizon", "5", "--every", "50"], capsys)
    assert code == 0 and out.startswith("t,x1,x12")
    code, out, _ = run(["equilibrium", "--scenario", path], capsys)
    assert code == 0 and "theta_1_0" in out


def test_figure_written(tmp_path, capsys):
    path = write(tmp_path, "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items())
                 + "\n[sweep]\nvariable = p\nstart = 0\nstop = 100\nsteps = 6\n")
    fig = tmp_path / "f.png"
    code, _, _ = run(["sweep", "--scenario", path, "--figure", str(fig)], capsys)
    assert code == 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("text", [
    "[model]\nq1 = 200\n",  # missing keys
    "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items()) + "\n[bogus]\nx = 1\n",
    "[model]\n" + "\n".join(f"{k} = {v}" for k, v in {**MODEL, "q2": 100}.items()),
    "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items()) + "\n[sweep]\nvariable = rho\nstart = 0\nstop = 1\nsteps = 3\n",
    "[model\nq1 = 1\n",
    "[model]\n" + "\n".join(f"{k} = {v}" for k, v in {**MODEL, "p": "cheap"}.items()),
])
def test_bad_scenarios_exit_2(tmp_path, capsys, text):
    code, _, err = run(["run", "--scenario", write(tmp_path, text)], capsys)
    assert code == 2
    assert err.startswith("error:")


def test_missing_file_and_missing_flag_exit_2(capsys):
    assert run(["run", "--scenario", "/nonexistent.ini"], capsys)[0] == 2
    assert run(["run"], capsys)[0] == 2


def test_inconsistency_and_numerical_exit_codes(monkeypatch, tmp_path, capsys):
    path = write(tmp_path, "[model]\n" + "\n".join(f"{k} = {v}" for k, v in MODEL.items()))

    def boom(exc):
        def f(*a, **k):
            raise exc
        return f

    monkeypatch.setattr(cli, "run_scenario", boom(ModelInconsistencyError("bad", {"k": 1})))
    code, _, err = run(["run", "--scenario", path], capsys)
    assert code == 3 and '"k": 1' in err
    monkeypatch.setattr(cli, "run_scenario", boom(NumericalFailure("stuck")))
    assert run(["run", "--scenario", path], capsys)[0] == 4


def test_verify_exit_codes(monkeypatch, capsys):
    code, out, _ = run(["verify", "--suite", "tables", "--draws", "5", "--seed", "1"], capsys)
    assert code == 0
    assert out.splitlines()[1].startswith("tables,5,5,0,")
    from offload_adoption.verify import SuiteReport

    def failing(name, draws, seed):
        rep = SuiteReport(name, draws, passed=draws - 1, failed=1)
        rep.failures.append({"params": {}, "value": 1.0, "info": None})
        return rep

    monkeypatch.setattr(cli, "run_suite", failing)
    code, _, err = run(["verify", "--suite", "oracle", "--draws", "3"], capsys)
    assert code == 1 and err.strip()
    assert run(["verify", "--draws", "0"], capsys)[0] == 2


def test_bundled_scenarios_parse():
    names = [p.name for p in resources.files("offload_adoption").joinpath("scenarios").iterdir()
             if p.name.endswith(".ini")]
    assert len(names) >= 15
    for n in names:
        sc = load_scenario(resources.files("offload_adoption").joinpath("scenarios", n))
        assert sc.model.q2 > sc.model.q1


def test_cost_sweep_without_optimize_is_rejected():
    sc = scenario_from_dict({"model": MODEL, "sweep": {"variable": "c_ap", "start": 0, "stop": 1, "steps": 3}})
    with pytest.raises(ScenarioError):
        run_scenario(sc)


def test_cost_sweep_report_directions():
    rows = [{"value": 0.0, "eta_star": 1.0, "x12": 0.2}, {"value": 1.0, "eta_star": 0.8, "x12": 0.3},
            {"value": 2.0, "eta_star": 0.8, "x12": 0.25}]
    rep = cost_sweep_report(rows, "c_ap")
    assert rep["coverage_monotone"] is True
    assert rep["adoption_rises_as_coverage_falls"] == [(0.0, 1.0)]
    assert cost_sweep_report(rows, "c_wf")["coverage_monotone"] is False


def test_fmt():
    assert cli.fmt(-0.0) == "0"
    assert cli.fmt(math.inf) == "inf"
    assert cli.fmt(True) == "true"
    assert cli.fmt(1 / 3) == "0.333333333333"
