import numpy as np
import pytest

from offload_adoption.equilibrium import closed_form_equilibrium
from offload_adoption.errors import ParameterError
from offload_adoption.model import ModelParams
from offload_adoption.pricing import (
    CITIES,
    INAPPLICABLE,
    CityProfile,
    CostParams,
    GridSpec,
    condition_total_adoption_decreases,
    condition_x1_increases_with_p,
    estimate_costs,
    grid_search,
    optimize_profit,
    profit,
    revenue,
    revenue_max_full,
    revenue_max_prices,
    revenue_table,
    revmax_adoption,
    revmax_adoption_branches,
    revmax_base_adopted,
    round_sig,
    transition_price,
)

from .conftest import BASE_RETURNS, PRICE_RISE, TOTAL_DECLINES


def market(rng):
    q1 = rng.uniform(20, 200)
    return ModelParams(q1, q1 + rng.uniform(10, 200), rng.uniform(5, 150), rng.uniform(5, 150),
                       rng.uniform(0.05, 1.0), 0.0, 0.0)


def test_table_v_matches_equilibrium_at_optimal_prices():
    rng = np.random.default_rng(5)
    for _ in range(100):
        P = market(rng)
        dec = revenue_max_prices(P)
        tv = revmax_adoption(P.q1, P.q2, P.gamma1, P.gamma2, P.eta)
        assert tuple(dec.adoption) == pytest.approx(tv, abs=1e-9)
        assert (dec.adoption.x1 > 0) == revmax_base_adopted(P.q1, P.q2, P.gamma1, P.gamma2, P.eta)


def test_revenue_max_beats_local_perturbations():
    rng = np.random.default_rng(8)
    for _ in range(30):
        P = market(rng)
        dec = revenue_max_prices(P)
        for dp, dd in rng.normal(scale=2.0, size=(20, 2)):
            Q = P.with_(p=dec.p_star + dp, delta=dec.delta_star + dd)
            assert revenue(Q, closed_form_equilibrium(Q, with_stability=False)) <= dec.objective_value + 1e-9


def test_revenue_optimum_non_decreasing_in_coverage():
    rng = np.random.default_rng(9)
    for _ in range(20):
        P = market(rng)
        vals = [revenue_max_prices(P, float(e)).objective_value for e in np.linspace(0, 1, 41)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_revenue_max_full_at_full_coverage():
    dec = revenue_max_full(BASE_RETURNS)
    assert dec.eta_star == 1.0
    assert dec.objective_value == pytest.approx(58.409, abs=1e-3)
    assert 0 < dec.adoption.x1 + dec.adoption.x12 < 1


def test_branches_agree_on_boundary():
    q1, q2, g1, g2 = 100.0, 200.0, 30.0, 40.0
    # eta g2 q1 = (1 - eta) g1 q2  =>  eta = g1 q2 / (g2 q1 + g1 q2)
    eta = g1 * q2 / (g2 * q1 + g1 * q2)
    mixed, bundle = revmax_adoption_branches(q1, q2, g1, g2, eta)
    assert mixed == pytest.approx(bundle, abs=1e-9)


def test_revenue_table_rows_realize_claimed_revenue():
    P = BASE_RETURNS
    for e in (0.2, 0.5, 0.9):
        table = revenue_table(P.q1, P.q2, P.gamma1, P.gamma2, e)
        for label in ("c", "d", "e"):
            row = table[label]
            Q = P.with_(p=row["p"], delta=row["delta"], eta=e)
            eq = closed_form_equilibrium(Q, with_stability=False)
            if label in eq.constraint_report["satisfied_rows"]:
                assert revenue(Q, eq) == pytest.approx(row["revenue"], abs=1e-9)


def _fd(params, attr, h=1e-5):
    lo = closed_form_equilibrium(params.with_(**{attr: getattr(params, attr) - h}), with_stability=False)
    hi = closed_form_equilibrium(params.with_(**{attr: getattr(params, attr) + h}), with_stability=False)
    return lo, hi


def test_total_adoption_predicate_matches_finite_difference():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 60:
        q1 = rng.uniform(20, 200)
        P = ModelParams(q1, q1 + rng.uniform(10, 200), rng.uniform(5, 150), rng.uniform(5, 150),
                        rng.uniform(0.1, 0.9), rng.uniform(0, q1), rng.uniform(-20, 60))
        pred = condition_total_adoption_decreases(P)
        if not pred.applicable or abs(pred.margin) < 1e-3:
            continue
        lo, hi = _fd(P, "eta")
        if {lo.region, hi.region} != {"e"}:
            continue
        assert pred.status == (hi.total < lo.total)
        checked += 1


def test_x1_price_predicate_matches_finite_difference():
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 60:
        q1 = rng.uniform(20, 200)
        P = ModelParams(q1, q1 + rng.uniform(5, 60), rng.uniform(5, 200), rng.uniform(5, 150),
                        rng.uniform(0.05, 0.9), rng.uniform(0, q1), rng.uniform(0, 60))
        pred = condition_x1_increases_with_p(P)
        if not pred.applicable or abs(pred.margin) < 1e-3:
            continue
        lo, hi = _fd(P, "p")
        if {lo.region, hi.region} != {"c"}:
            continue
        assert pred.status == (hi.x1 > lo.x1)
        checked += 1


def test_predicates_inapplicable_outside_their_region():
    assert condition_x1_increases_with_p(BASE_RETURNS.with_(p=500.0)).status == INAPPLICABLE
    assert condition_total_adoption_decreases(BASE_RETURNS.with_(p=500.0)).status == INAPPLICABLE


def test_transition_price_is_where_bundle_vanishes():
    tp = transition_price(PRICE_RISE)
    assert tp == pytest.approx(118.333, abs=1e-3)
    just_below = closed_form_equilibrium(PRICE_RISE.with_(p=tp - 1e-3), with_stability=False)
    just_above = closed_form_equilibrium(PRICE_RISE.with_(p=tp + 1e-3), with_stability=False)
    assert just_below.x12 > 0 and just_above.x12 == pytest.approx(0.0, abs=1e-12)


def test_profit_formula():
    P = BASE_RETURNS
    costs = CostParams(2.0, 3.0)
    x = (0.2, 0.3)
    assert profit(P, x, costs) == pytest.approx(revenue(P, x) + 2.0 * 0.5 * 0.3 - 3.0 * 0.5)


def test_zero_cost_profit_grid_matches_revenue_table():
    rng = np.random.default_rng(6)
    for _ in range(5):
        P = market(rng)
        dec = optimize_profit(P, CostParams(), GridSpec(41, 41, 41))
        assert dec.objective_value == pytest.approx(revenue_max_full(P).objective_value, abs=1e-6)


def test_grid_search_fixed_eta():
    val, (p, d, e) = grid_search(TOTAL_DECLINES, CostParams(), GridSpec(41, 41, 1), "revenue", fixed_eta=0.4)
    assert e == 0.4
    assert val == pytest.approx(revenue_max_prices(TOTAL_DECLINES, 0.4).objective_value, abs=1e-6)


def test_estimate_costs_formula():
    c = estimate_costs(CityProfile("x", 2.0, 1000.0, 0.02, 100.0, peak_usage_mb=500.0, peak_wifi_ratio=0.5))
    assert c.c_wf == pytest.approx(2.0 * 0.5 * 500.0 / 100.0)
    assert c.c_ap == pytest.approx(100.0 / (0.02 * 1000.0))
    assert set(CITIES) == {"small", "sparse", "dense"}


def test_round_sig():
    assert round_sig(5.4120) == 5.4
    assert round_sig(10.2828) == 10.0
    assert round_sig(0.012345, 3) == 0.0123
    assert round_sig(0.0) == 0.0


def test_cost_and_city_validation():
    with pytest.raises(ParameterError):
        CostParams(-1.0, 0.0)
    with pytest.raises(ParameterError):
        CityProfile("x", 1.0, 1.0, 1.0, 1.0, peak_wifi_ratio=1.5)
