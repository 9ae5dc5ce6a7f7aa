import math

import numpy as np
import pytest

from offload_adoption.dynamics import integrate, residual
from offload_adoption.equilibrium import (
    candidate_rows,
    closed_form_arrays,
    closed_form_equilibrium,
    damped_iteration,
    lin_error_bound,
    lin_error_scan,
    newton_polish,
    solve,
    solve_fixed_point,
)
from offload_adoption.errors import DomainError
from offload_adoption.model import REGIONS, UNIFORM, Beta, Linear, LogMarkov, ModelParams
from offload_adoption.verify import random_params

from .conftest import BASE_RETURNS, TOTAL_DECLINES


def test_closed_form_is_a_fixed_point(draws200):
    for P in draws200:
        eq = closed_form_equilibrium(P)
        assert eq.residual < 1e-9
        assert eq.stability.asymptotically_stable


def test_closed_form_matches_ode(draws200):
    for P in draws200[:60]:
        eq = closed_form_equilibrium(P, with_stability=False)
        end = integrate((0.5, 0.25), P).final
        assert np.abs(np.subtract(end, eq.state)).max() < 1e-6


def test_every_region_is_reached(draws200):
    seen = {closed_form_equilibrium(P, with_stability=False).region for P in draws200}
    assert seen == set(REGIONS)


def test_vectorized_closed_form_matches_scalar(draws200):
    cols = [np.array([getattr(P, k) for P in draws200]) for k in ("q1", "q2", "gamma1", "gamma2", "eta", "p", "delta")]
    x1, x12, idx = closed_form_arrays(*cols)
    for i, P in enumerate(draws200):
        eq = closed_form_equilibrium(P, with_stability=False)
        assert (x1[i], x12[i]) == pytest.approx(tuple(eq.state), abs=1e-12)
        assert REGIONS[idx[i]] == eq.region


def test_region_table_examples():
    # prices above every valuation: nobody adopts
    assert closed_form_equilibrium(BASE_RETURNS.with_(p=500.0)).region == "g"
    # subsidy large enough for everyone to take the base alone
    eq = closed_form_equilibrium(BASE_RETURNS.with_(p=-60.0, delta=100.0))
    assert eq.region == "f" and eq.state == (1.0, 0.0)


def test_eta_zero_rows():
    rows = candidate_rows(100, 150, 10, 10, 0.0, 20, 5)
    assert math.isnan(rows["b"][0]) and math.isnan(rows["c"][0])
    eq = closed_form_equilibrium(ModelParams(100, 150, 10, 10, 0.0, 20, 5))
    assert eq.region == "d" and eq.x12 == 0.0
    eq = closed_form_equilibrium(ModelParams(100, 150, 10, 10, 0.0, 20, -5))
    assert eq.x1 == 0.0 and eq.x12 > 0


def test_damped_iteration_and_polish_reach_closed_form():
    eq = closed_form_equilibrium(BASE_RETURNS, with_stability=False)
    state, res, ok = damped_iteration((0.1, 0.1), BASE_RETURNS, Linear(50), Linear(20), UNIFORM)
    assert ok and res < 1e-9
    assert state == pytest.approx(tuple(eq.state), abs=1e-8)
    polished, r2 = newton_polish(state, BASE_RETURNS, Linear(50), Linear(20), UNIFORM)
    assert r2 <= res


def test_solve_fixed_point_agrees_with_closed_form():
    rng = np.random.default_rng(11)
    for _ in range(20):
        P = random_params(rng)
        cf = closed_form_equilibrium(P, with_stability=False)
        fp = solve_fixed_point(P, Linear(P.gamma1), Linear(P.gamma2), UNIFORM)
        assert np.abs(np.subtract(fp.state, cf.state)).max() < 1e-6
        assert fp.agreement < 1e-6


def test_solve_dispatch():
    assert solve(BASE_RETURNS).method == "closed_form"
    assert solve(BASE_RETURNS, dist=Beta(2, 2)).method == "fixed_point"
    # an explicit linear slope overrides the params' slope
    a = solve(BASE_RETURNS, t1=Linear(30.0))
    b = closed_form_equilibrium(BASE_RETURNS.with_(gamma1=30.0))
    assert a.state == b.state


def test_beta_and_logmarkov_fixed_points():
    eq = solve_fixed_point(TOTAL_DECLINES, dist=Beta(5, 2))
    assert eq.residual < 1e-9 and eq.stability.asymptotically_stable
    P = ModelParams(50.0, 80.0, 1.0, 1.0, 0.5, 20.0, 5.0)
    eq = solve_fixed_point(P, LogMarkov(10, 0.8), LogMarkov(50, 0.8))
    assert eq.residual < 1e-9
    assert residual(eq.state, P, LogMarkov(10, 0.8), LogMarkov(50, 0.8)) < 1e-9


def test_linearization_bound_and_scan():
    assert lin_error_bound(1.0, 0.5) == 0.0625
    assert lin_error_bound(2.0, 0.5) == 0.125
    err = lin_error_scan(1.0, 0.5)
    assert 0.012 <= err <= 0.014
    assert err <= lin_error_bound(1.0, 0.5)
    assert lin_error_scan(1.0, 0.5, "tangent") <= lin_error_bound(1.0, 0.5)
    with pytest.raises(DomainError):
        lin_error_bound(1.0, 1.0)
    with pytest.raises(ValueError):
        lin_error_scan(1.0, 0.5, "spline")
