"""Swarm update rule, schedules, diagnostics and the decay certificate."""

import logging
import math

import numpy as np
import pytest

from ztrack.engine import (
    DivisionDomain,
    InvalidSchedule,
    MetricsRow,
    StepSchedule,
    init,
    metrics,
    rate_bound,
    rate_constants,
    step,
    validate_schedule,
)
from ztrack.estimators import GradientEstimate
from ztrack.objectives import Objective, quadratic_objective
from ztrack.topology import Graph, laplacian_weights

ALL_HALF = np.full((2, 2), 0.5)


def zero_objective(d):
    return Objective(
        dim=d,
        smoothness=0.0,
        query=lambda x, rng: 0.0,
        true_grad=lambda x: np.zeros(d),
        expectation=lambda x: 0.0,
    )


def echo_estimator(obj, x, gamma, rng):
    # deterministic stub: the "estimate" is the query row itself
    return GradientEstimate(g=x.copy(), queries_used=0, gamma_used=gamma)


def spawn_rngs(n, seed=0):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def test_validate_schedule_good_and_boundary():
    assert validate_schedule(0.51, 0.17) == []
    # both strict inequalities fail exactly at the boundary point
    bad = validate_schedule(0.5, 1.0 / 6.0)
    assert len(bad) == 2
    assert any("v1 + 3*v2 > 1" in msg for msg in bad)
    assert any("v1 > 1/2" in msg for msg in bad)


def test_validate_schedule_strict_sum():
    assert len(validate_schedule(0.49, 0.51)) == 1
    bad = validate_schedule(0.49, 0.51, strict=True)
    assert len(bad) == 2
    assert any("v1 + v2 < 1" in msg for msg in bad)


def test_schedule_values_match_closed_form():
    s = StepSchedule(eta0=1.5, gamma0=3.5, v1=0.51, v2=0.17)
    assert s.eta(0) == 1.5
    assert s.gamma(0) == 3.5
    # independent log-domain evaluation
    assert s.eta(99) == pytest.approx(
        math.exp(math.log(1.5) - 0.51 * math.log(100.0)), rel=1e-14
    )
    assert s.eta(99) == pytest.approx(0.1432488879, abs=1e-9)
    assert s.gamma(99) == pytest.approx(
        math.exp(math.log(3.5) - 0.17 * math.log(100.0)), rel=1e-14
    )


def test_schedule_rejects_bad_parameters():
    with pytest.raises(InvalidSchedule):
        StepSchedule(eta0=0.0, gamma0=1.0, v1=0.51, v2=0.17)
    with pytest.raises(InvalidSchedule):
        StepSchedule(eta0=1.0, gamma0=-1.0, v1=0.51, v2=0.17)
    with pytest.raises(InvalidSchedule):
        StepSchedule(eta0=1.0, gamma0=1.0, v1=0.4, v2=0.1)


def test_init_seeds_tracker_with_first_estimates():
    objs = [quadratic_objective(np.zeros(2)) for _ in range(3)]
    s = StepSchedule(eta0=1.0, gamma0=1.0, v1=0.51, v2=0.17)
    x0 = np.arange(6, dtype=float).reshape(3, 2)
    state = init(x0, objs, s, spawn_rngs(3))
    assert state.k == 0
    assert np.array_equal(state.x, x0)
    assert np.array_equal(state.y, state.g_prev)


def test_init_validates_shapes():
    objs = [quadratic_objective(np.zeros(2))] * 2
    s = StepSchedule(eta0=1.0, gamma0=1.0, v1=0.51, v2=0.17)
    with pytest.raises(ValueError):
        init(np.zeros((3, 2)), objs, s, spawn_rngs(3))
    with pytest.raises(ValueError):
        init(np.zeros((2, 2)), objs, s, spawn_rngs(1))


def test_step_mixes_midpoint_with_zero_estimates():
    # zero objective gives exactly zero estimates, so one step plainly
    # averages the start rows: (1.0, 0.8) -> (0.9, 0.9)
    objs = [zero_objective(1), zero_objective(1)]
    s = StepSchedule(eta0=0.1, gamma0=1.0, v1=0.51, v2=0.17)
    state = init(np.array([[1.0], [0.8]]), objs, s, spawn_rngs(2))
    nxt = step(state, ALL_HALF, objs, s, spawn_rngs(2))
    assert nxt.k == 1
    assert np.allclose(nxt.x, [[0.9], [0.9]], atol=1e-15)
    assert np.all(nxt.y == 0.0)


def test_step_hand_computed_update():
    # echo estimator makes every quantity exact: from x0=[[2],[0]],
    # y0=g0=x0, eta(0)=1/2: x1 = W(x0 - y0/2) = [[1/2],[1/2]],
    # y1 = W y0 + x1 - x0 = [[-1/2],[3/2]]
    objs = [zero_objective(1), zero_objective(1)]
    s = StepSchedule(eta0=0.5, gamma0=1.0, v1=0.51, v2=0.17)
    rngs = spawn_rngs(2)
    state = init(np.array([[2.0], [0.0]]), objs, s, rngs, estimator=echo_estimator)
    nxt = step(state, ALL_HALF, objs, s, rngs, estimator=echo_estimator)
    assert np.allclose(nxt.x, [[0.5], [0.5]], atol=1e-15)
    assert np.allclose(nxt.y, [[-0.5], [1.5]], atol=1e-15)
    assert np.array_equal(nxt.g_prev, nxt.x)


def test_step_accepts_wrapped_mixing_matrix():
    objs = [zero_objective(1), zero_objective(1)]
    s = StepSchedule(eta0=0.1, gamma0=1.0, v1=0.51, v2=0.17)
    mix = laplacian_weights(Graph(2, frozenset({(0, 1)})))
    state = init(np.array([[1.0], [0.8]]), objs, s, spawn_rngs(2))
    a = step(state, mix, objs, s, spawn_rngs(2))
    b = step(state, mix.w, objs, s, spawn_rngs(2))
    assert np.array_equal(a.x, b.x)


def test_consensus_contracts_under_pure_mixing():
    # with zero estimates the rows evolve by x -> Wx, so the consensus
    # error must contract at least by rho^2 each step
    g = Graph(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)}))
    mix = laplacian_weights(g)
    objs = [zero_objective(3) for _ in range(4)]
    s = StepSchedule(eta0=0.1, gamma0=1.0, v1=0.51, v2=0.17)
    rng = np.random.default_rng(5)
    state = init(rng.standard_normal((4, 3)), objs, s, spawn_rngs(4))
    for _ in range(30):
        prev = metrics(state, objs, s).consensus_err
        state = step(state, mix, objs, s, spawn_rngs(4))
        cur = metrics(state, objs, s).consensus_err
        assert cur <= mix.rho_w**2 * prev + 1e-12


def test_mean_identities_over_trajectory():
    # the tracker mean equals the estimate mean, and the decision mean
    # performs plain gradient descent on it, both to machine precision
    n, d = 5, 3
    g = Graph(n, frozenset({(i, (i + 1) % n) if i < (i + 1) % n else ((i + 1) % n, i) for i in range(n)}))
    mix = laplacian_weights(g)
    objs = [quadratic_objective(np.full(d, float(i))) for i in range(n)]
    s = StepSchedule(eta0=0.5, gamma0=1.0, v1=0.51, v2=0.17)
    rngs = spawn_rngs(n, seed=7)
    state = init(np.random.default_rng(8).standard_normal((n, d)), objs, s, rngs)
    worst_track = 0.0
    worst_descent = 0.0
    for _ in range(200):
        xbar = state.x.mean(axis=0)
        ybar = state.y.mean(axis=0)
        gbar = state.g_prev.mean(axis=0)
        worst_track = max(worst_track, float(np.abs(ybar - gbar).max()))
        predicted = xbar - s.eta(state.k) * ybar
        state = step(state, mix, objs, s, rngs)
        worst_descent = max(
            worst_descent, float(np.abs(state.x.mean(axis=0) - predicted).max())
        )
    assert worst_track <= 1e-13
    assert worst_descent <= 1e-13


def test_step_warns_past_iterate_guard(caplog):
    objs = [zero_objective(1), zero_objective(1)]
    s = StepSchedule(eta0=0.1, gamma0=1.0, v1=0.51, v2=0.17)
    state = init(np.array([[40.0], [40.0]]), objs, s, spawn_rngs(2))
    with caplog.at_level(logging.WARNING, logger="ztrack.engine"):
        step(state, ALL_HALF, objs, s, spawn_rngs(2), iterate_guard=1.0)
    assert any("guard" in rec.message for rec in caplog.records)


def test_metrics_hand_computed():
    objs = [quadratic_objective(np.zeros(2)) for _ in range(2)]
    s = StepSchedule(eta0=1.5, gamma0=3.5, v1=0.51, v2=0.17)
    state_like = init(np.array([[1.0, 1.0], [3.0, 3.0]]), objs, s, spawn_rngs(2))
    row = metrics(state_like, objs, s)
    assert isinstance(row, MetricsRow)
    assert row.k == 0 and row.eta == 1.5 and row.gamma == 3.5
    # xbar = (2,2): loss 4, grad (2,2) -> 8, spread 4
    assert row.loss == pytest.approx(4.0, rel=1e-14)
    assert row.grad_norm_sq == pytest.approx(8.0, rel=1e-14)
    assert row.consensus_err == pytest.approx(4.0, rel=1e-14)
    assert row.accuracy is None


def test_rate_constants_hand_computed():
    s = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.6, v2=0.2)
    c = rate_constants(
        delta0=1.0,
        smoothness=2.0,
        n=4,
        rho_w=0.5,
        sigma1=3.0,
        sigma3=0.25,
        sigma4=1.0,
        schedule=s,
        x0_spread=8.0,
        mbar=5.0,
        g=7.0,
    )
    assert c.a1 == pytest.approx(4.0 + 16.0 / 4.0 * 8.0 / 0.75, rel=1e-12)
    assert c.a2 == pytest.approx((9.0 / 0.125) * 4.0 * 1.2, rel=1e-12)
    assert c.a3 == pytest.approx(24.0, rel=1e-12)
    assert c.a4 == pytest.approx(196.0, rel=1e-12)


def test_rate_constants_zero_contraction_terms():
    # a clique mixes in one hop: rho 0 removes the neighbour-error term,
    # and coincident start rows remove the spread term from a1
    s = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.6, v2=0.2)
    c = rate_constants(1.0, 2.0, 4, 0.0, 3.0, 0.25, 1.0, s, 0.0, 5.0, 7.0)
    assert c.a4 == 0.0
    assert c.a1 == pytest.approx(2.0 / (0.25 * 1.0 * 2.0), rel=1e-12)


def test_rate_constants_rejects_bad_inputs():
    s = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.6, v2=0.2)
    with pytest.raises(InvalidSchedule):
        rate_constants(1.0, 2.0, 4, 1.0, 3.0, 0.25, 1.0, s, 0.0, 5.0, 7.0)
    flat = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.8, v2=0.2)
    with pytest.raises(InvalidSchedule):
        # v1 + v2 = 1 is allowed for running but not for the certificate
        rate_constants(1.0, 2.0, 4, 0.5, 3.0, 0.25, 1.0, flat, 0.0, 5.0, 7.0)


def test_rate_bound_hand_computed():
    s = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.6, v2=0.2)
    c = rate_constants(1.0, 2.0, 4, 0.5, 3.0, 0.25, 1.0, s, 8.0, 5.0, 7.0)
    got = rate_bound(c, 98, 0.6, 0.2)
    head = 0.2
    norm = 100.0**0.2 - 1.0
    total = c.a1 + c.a2 / 0.2 + c.a3 / 0.2 + c.a4 / 0.8
    assert got == pytest.approx(head / norm * total, rel=1e-12)
    # longer horizons only improve the certificate
    assert rate_bound(c, 10_000, 0.6, 0.2) < got


def test_rate_bound_division_domain():
    s = StepSchedule(eta0=1.0, gamma0=2.0, v1=0.6, v2=0.2)
    consts = rate_constants(1.0, 2.0, 4, 0.5, 3.0, 0.25, 1.0, s, 8.0, 5.0, 7.0)
    with pytest.raises(DivisionDomain):
        rate_bound(consts, 100, 0.5, 0.5)  # head = 0
    with pytest.raises(DivisionDomain):
        rate_bound(consts, 100, 0.9, 0.0)  # v1 + 3 v2 = 0.9 <= 1
    with pytest.raises(ValueError):
        rate_bound(consts, 0, 0.6, 0.2)


def test_trajectory_is_deterministic_given_streams():
    n, d = 4, 2
    g = Graph(4, frozenset({(0, 1), (1, 2), (2, 3)}))
    mix = laplacian_weights(g)
    objs = [quadratic_objective(np.full(d, float(i))) for i in range(n)]
    s = StepSchedule(eta0=0.5, gamma0=1.0, v1=0.51, v2=0.17)

    def run():
        rngs = spawn_rngs(n, seed=99)
        state = init(np.zeros((n, d)), objs, s, rngs)
        for _ in range(50):
            state = step(state, mix, objs, s, rngs)
        return state.x

    assert np.array_equal(run(), run())
