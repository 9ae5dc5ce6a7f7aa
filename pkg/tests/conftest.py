import numpy as np
import pytest

from offload_adoption.model import ModelParams
from offload_adoption.verify import random_draws


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def draws200():
    return random_draws(200, seed=2024)


# market used in several coverage examples
BASE_RETURNS = ModelParams(200.0, 250.0, 50.0, 20.0, 0.5, 40.0, 10.0)
TOTAL_DECLINES = ModelParams(100.0, 300.0, 50.0, 100.0, 0.5, 40.0, 10.0)
PRICE_RISE = ModelParams(200.0, 225.0, 150.0, 50.0, 0.5, 40.0, 30.0)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion, failing if any witness failed
# (expected failures count as failures here)
# ---------------------------------------------------------------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "failed": []})
    bad = rep.failed or (rep.skipped and hasattr(rep, "wasxfail"))
    if rep.when == "call" or bad:
        if bad:
            entry["ok"] = False
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] else "FAIL"
        extra = "" if e["ok"] else f"  (failing: {', '.join(e['failed'])})"
        tr.write_line(f"criterion {n:2d} {status}: {e['title']}{extra}")
