import numpy as np
import pytest

from offload_adoption.dynamics import (
    SIMPLEX_STARTS,
    divergence_check,
    eig2,
    integrate,
    jacobian,
    max_pairwise_distance,
    residual,
    willingness_jacobian,
)
from offload_adoption.model import Beta, LogMarkov, ModelParams, region_of, thresholds, willingness
from offload_adoption.verify import random_params

from .conftest import BASE_RETURNS, TOTAL_DECLINES


def fd_jacobian(state, params, t1=None, t2=None, dist=None, h=1e-7):
    x = np.array(state, dtype=float)
    base = np.array(willingness(x, params, t1, t2, dist))
    out = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        out[:, j] = (np.array(willingness(x + e, params, t1, t2, dist)) - base) / h
    return out


def interior_points(params, rng, n, t1=None, t2=None):
    """Random states strictly inside one region (away from its boundaries)."""
    got = 0
    while got < n:
        u, v = rng.random(2)
        if u + v > 0.98:
            continue
        th = thresholds((u, v), params, t1, t2)
        r = region_of(th)
        vals = (th.theta_1_0, th.theta_12_1, th.theta_12_0)
        if min(min(abs(t), abs(t - 1)) for t in vals) < 1e-4 or abs(vals[0] - vals[1]) < 1e-4:
            continue
        got += 1
        yield (u, v), r


@pytest.mark.parametrize("seed", range(5))
def test_analytic_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    P = random_params(rng)
    for x, _ in interior_points(P, rng, 20):
        dh, _, _ = willingness_jacobian(x, P)
        assert dh == pytest.approx(fd_jacobian(x, P), abs=1e-5)


def test_jacobian_nonlinear_models_match_finite_differences():
    rng = np.random.default_rng(3)
    P = ModelParams(50.0, 80.0, 1.0, 1.0, 0.5, 20.0, 5.0)
    t1, t2 = LogMarkov(10, 0.8), LogMarkov(50, 0.8)
    for x, _ in interior_points(P, rng, 15, t1, t2):
        dh, _, _ = willingness_jacobian(x, P, t1, t2, Beta(2, 2))
        assert dh == pytest.approx(fd_jacobian(x, P, t1, t2, Beta(2, 2)), abs=1e-4)


def test_eig2_against_numpy():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = rng.normal(size=(2, 2))
        ours = sorted(eig2(m), key=lambda z: (z.real, z.imag))
        ref = sorted(np.linalg.eigvals(m), key=lambda z: (z.real, z.imag))
        assert np.allclose(ours, ref, atol=1e-12)


def test_jacobian_includes_rho():
    P = BASE_RETURNS.with_(rho=0.3)
    eq_state = integrate((0.2, 0.2), P).final
    rep = jacobian(eq_state, P)
    rep1 = jacobian(eq_state, P.with_(rho=1.0))
    assert rep.jacobian == pytest.approx(0.3 * rep1.jacobian)
    assert rep.asymptotically_stable


def test_integrate_converges_and_respects_simplex():
    traj = integrate((1.0, 0.0), TOTAL_DECLINES, horizon=500.0)
    assert traj.converged
    assert residual(traj.final, TOTAL_DECLINES) < 1e-9
    s = traj.states
    assert (s >= 0).all() and (s.sum(axis=1) <= 1 + 1e-12).all()


def test_integrate_full_horizon_records_times():
    traj = integrate((0.0, 0.0), BASE_RETURNS, horizon=10.0, step=0.05, stop_on_convergence=False)
    assert traj.times[-1] == pytest.approx(10.0)
    assert len(traj.times) == len(traj.states)


def test_integrate_rejects_bad_step():
    with pytest.raises(ValueError):
        integrate((0, 0), BASE_RETURNS, horizon=1.0, step=0.0)


def test_multi_start_endpoints_agree():
    ends = [integrate(s, BASE_RETURNS).final for s in SIMPLEX_STARTS]
    assert max_pairwise_distance(ends) < 1e-6


def test_divergence_negative_for_linear_uniform():
    rng = np.random.default_rng(7)
    for _ in range(10):
        rep = divergence_check(random_params(rng), samples=100)
        assert rep.passed and rep.max_divergence < 0
        assert rep.samples == 100
