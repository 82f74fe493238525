import math

import numpy as np
import pytest

import rfdopt as r
from rfdopt.fdgrad import EvalCounter
from rfdopt.solver import (BRANCH_S, BRANCH_U1, BRANCH_U2, BRANCH_U3,
                           SolverState, read_trace_csv)

from conftest import euclidean_quadratic


def _state(x, f_x, sigma, tau):
    return SolverState(k=0, x=np.atleast_1d(np.asarray(x, float)),
                       f_x=f_x, sigma=sigma, tau=tau, counter=EvalCounter(),
                       best_f=f_x)


def test_config_validation():
    with pytest.raises(r.ConfigError):
        r.SolverConfig(sigma0=1.0, tau0=0.5)
    with pytest.raises(r.ConfigError):
        r.SolverConfig(epsilon=0.0)
    with pytest.raises(r.ConfigError):
        r.SolverConfig(scheme="nope")
    r.SolverConfig(sigma0=1.0, tau0=1.0)  # boundary allowed


def test_step_small_gradient_is_u1():
    # d=1, eps=1, tau=1 -> h = 0.4; |g| = 0.5 < 4/5
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: 0.5 * float(v[0]))
    cfg = r.SolverConfig(sigma0=1.0, tau0=1.0, epsilon=1.0)
    state = _state([0.0], 0.0, 1.0, 1.0)
    state, rec = r.step(state, obj, m, cfg)
    assert rec.branch == BRANCH_U1
    assert rec.h == pytest.approx(0.4)
    assert rec.gnorm == pytest.approx(0.5, abs=1e-12)
    assert state.tau == 2.0 and state.sigma == 1.0
    assert state.cached is None
    assert (state.counter.fe, state.counter.re) == (1, 1)


def test_step_sufficient_decrease_is_s():
    # f = x^2/2 at x=1, h=0.1 gives g=1.05; trial -0.05 decreases enough
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: 0.5 * float(v[0] ** 2))
    cfg = r.SolverConfig(sigma0=1.0, tau0=1.0, epsilon=0.25)
    state = _state([1.0], 0.5, 1.0, 1.0)
    state, rec = r.step(state, obj, m, cfg)
    assert rec.branch == BRANCH_S
    # the basis direction is +-1, so the probe lands at 1.1 or 0.9
    assert min(abs(rec.gnorm - 1.05), abs(rec.gnorm - 0.95)) <= 1e-12
    assert abs(state.x[0]) == pytest.approx(1.0 - rec.gnorm, abs=1e-12)
    assert 0.5 - rec.f >= rec.gnorm ** 2 / 4.0
    assert state.sigma == 0.5 and state.tau == 1.0


def test_step_failed_decrease_sigma_overtakes_tau_is_u2():
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: 50.0 * float(v[0] ** 2))
    cfg = r.SolverConfig(sigma0=1.0, tau0=8.0, epsilon=1.0)
    state = _state([1.0], 50.0, 8.0, 8.0)
    state, rec = r.step(state, obj, m, cfg)
    assert rec.branch == BRANCH_U2
    assert state.sigma == 16.0 and state.tau == 16.0
    assert state.cached is None


def test_u3_retains_gradient_and_costs_one_eval():
    # small sigma makes the first trial overshoot while 2*sigma <= tau
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: 0.5 * float(v[0] ** 2))
    cfg = r.SolverConfig(sigma0=0.125, tau0=8.0, epsilon=0.25)
    state = _state([1.0], 0.5, 0.125, 8.0)
    state, rec = r.step(state, obj, m, cfg)
    assert rec.branch == BRANCH_U3
    assert state.cached is not None
    fe0, re0 = state.counter.fe, state.counter.re
    state, rec2 = r.step(state, obj, m, cfg)
    assert (state.counter.fe - fe0, state.counter.re - re0) == (1, 1)
    assert rec2.h == rec.h


def test_run_constant_objective_stalls():
    m = r.Euclidean(3)
    obj = r.Objective(lambda v: 1.0)
    cfg = r.SolverConfig(budget_fe=10_000)
    trace = r.run(obj, m, np.ones(3), cfg)
    assert trace.termination_reason == "stall"
    counts = r.classify_trace(trace)
    assert counts["U1"] == len(trace.records)
    assert counts["S"] == counts["U2"] == counts["U3"] == 0
    assert np.allclose(trace.x_final, np.ones(3))


def test_run_quadratic_reaches_epsilon_criticality():
    obj = euclidean_quadratic([1.0, 1.0])
    m = r.Euclidean(2)
    cfg = r.SolverConfig(sigma0=1.0, tau0=100.0, epsilon=1e-5,
                         budget_fe=100_000, lipschitz_ref=1.0)
    trace = r.run(obj, m, np.array([1.0, 1.0]), cfg)
    assert trace.termination_reason == "epsilon_stop"
    assert np.linalg.norm(trace.x_final) <= 1e-5  # grad = x for this f


def test_run_rayleigh_quotient_on_circle():
    a = np.array([2.0, 1.0])
    obj = r.Objective(lambda v: -0.5 * float(v @ (a * v)),
                      extrinsic_evaluable=True,
                      euclidean_gradient=lambda v: -(a * v))
    m = r.Oblique(2, 1)
    x0 = np.array([0.01, 1.0])
    x0 = x0 / np.linalg.norm(x0)
    cfg = r.SolverConfig(budget_fe=2000)
    trace = r.run(obj, m, x0, cfg)
    assert trace.f_final == pytest.approx(-1.0, abs=1e-6)
    assert abs(abs(trace.x_final[0]) - 1.0) <= 1e-3


def test_run_at_exact_critical_point_stays_put():
    # the start is already critical; the solver certifies it and stays
    a = np.array([2.0, 1.0])
    obj = r.Objective(lambda v: -0.5 * float(v @ (a * v)))
    m = r.Oblique(2, 1)
    trace = r.run(obj, m, np.array([0.0, 1.0]), r.SolverConfig(budget_fe=2000))
    assert np.allclose(trace.x_final, [0.0, 1.0])
    assert trace.termination_reason in ("stall", "epsilon_stop")


def test_monotone_descent_and_sufficient_decrease():
    obj = euclidean_quadratic(np.linspace(1, 5, 4))
    m = r.Euclidean(4)
    cfg = r.SolverConfig(budget_fe=3000, seed=3)
    trace = r.run(obj, m, np.array([2.0, -1.0, 0.5, 1.5]), cfg)
    prev = trace.f0
    for rec in trace.records:
        assert rec.f <= prev
        if rec.branch == BRANCH_S:
            assert prev - rec.f >= rec.gnorm ** 2 / (4.0 * rec.sigma)
            assert rec.f < prev
        else:
            assert rec.f == prev
        prev = rec.f


def test_budget_overshoot_bounded():
    obj = euclidean_quadratic(np.ones(5))
    m = r.Euclidean(5)
    cfg = r.SolverConfig(budget_fe=57)
    trace = r.run(obj, m, np.ones(5), cfg)
    assert trace.termination_reason == "budget"
    assert trace.fe_total <= 57 + 5 + 2


def test_classification_identities():
    obj = euclidean_quadratic(np.geomspace(1, 30, 6))
    m = r.Euclidean(6)
    cfg = r.SolverConfig(sigma0=1.0, tau0=1.0, epsilon=1e-4,
                         budget_fe=50_000, lipschitz_ref=30.0, seed=11)
    trace = r.run(obj, m, np.full(6, 1.3), cfg)
    counts = r.classify_trace(trace)
    assert trace.tau_final == trace.config.tau0 * 2.0 ** (
        counts["U1"] + counts["U2"])
    assert trace.sigma_final == trace.config.sigma0 * 2.0 ** (
        counts["U2"] + counts["U3"] - counts["S"])


def test_tau_monotone_and_sigma_capped():
    obj = euclidean_quadratic(np.geomspace(1, 10, 4))
    m = r.Euclidean(4)
    cfg = r.SolverConfig(sigma0=0.5, tau0=2.0, budget_fe=2000, seed=5)
    trace = r.run(obj, m, np.full(4, -1.0), cfg)
    taus = [rec.tau for rec in trace.records] + [trace.tau_final]
    assert all(b >= a for a, b in zip(taus, taus[1:]))
    for rec in trace.records:
        assert rec.sigma <= rec.tau


def test_dfqrm_coupling():
    obj = euclidean_quadratic(np.geomspace(1, 20, 5))
    m = r.Euclidean(5)
    cfg = r.SolverConfig(scheme=r.DFQRM, sigma0=1.0, tau0=100.0,
                         budget_fe=3000, seed=2)
    trace = r.run(obj, m, np.full(5, 0.7), cfg)
    counts = r.classify_trace(trace)
    assert counts["U3"] == 0
    for rec in trace.records:
        assert rec.sigma == rec.tau
    # coupled parameter starts from sigma0 regardless of tau0
    assert trace.records[0].tau == 1.0


def test_extrinsic_scheme_needs_extrinsic_objective():
    obj = r.Objective(lambda v: float(v @ v))
    with pytest.raises(r.ConfigError):
        r.run(obj, r.Euclidean(2), np.zeros(2),
              r.SolverConfig(scheme=r.EXT_RFD))


def test_run_rejects_infeasible_start():
    obj = r.Objective(lambda v: 0.0)
    with pytest.raises(r.ManifoldError):
        r.run(obj, r.Stiefel(3, 2), np.ones(6), r.SolverConfig())


def test_nonfinite_trial_aborts():
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: float("inf") if v[0] < 0 else float(v[0]))
    cfg = r.SolverConfig(sigma0=4.0, tau0=4.0, epsilon=0.1, budget_fe=100)
    with pytest.raises(r.SolverAbort):
        r.run(obj, m, np.array([0.5]), cfg)


def test_theorem1_bound_values():
    fe, re = r.theorem1_bound(1.0, 1.0, 1.0, 0.0, 1.0, 1, r.INT_RFD)
    assert fe == pytest.approx(37.5)
    assert re == pytest.approx(25.0)
    fe, re = r.theorem1_bound(1.0, 1.0, 1.0, 0.0, 1.0, 1, r.EXT_RFD)
    assert fe == pytest.approx(37.5)
    assert re == pytest.approx(12.5)
    # log term vanishes when tau_max == tau0
    fe, _ = r.theorem1_bound(2.0, 2.0, 3.0, 1.0, 0.5, 4, r.INT_RFD)
    assert fe == pytest.approx(6 * 12.5 * 2.0 * 2.0 / 0.25)
    with pytest.raises(ValueError):
        r.theorem1_bound(1.0, 2.0, 1.0, 0.0, 1.0, 1)


def test_determinism_per_seed():
    obj = euclidean_quadratic(np.arange(1.0, 7.0))
    m = r.Euclidean(6)
    cfg = r.SolverConfig(budget_fe=700, seed=9)
    t1 = r.run(obj, m, np.full(6, 1.0), cfg)
    t2 = r.run(obj, m, np.full(6, 1.0), cfg)
    assert [(a.branch, a.f, a.fe, a.re) for a in t1.records] == \
           [(b.branch, b.f, b.fe, b.re) for b in t2.records]


def test_trace_csv_round_trip(tmp_path):
    obj = euclidean_quadratic(np.arange(1.0, 4.0))
    m = r.Euclidean(3)
    trace = r.run(obj, m, np.full(3, 1.2), r.SolverConfig(budget_fe=300))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    records = read_trace_csv(path)
    assert len(records) == len(trace.records)
    for got, want in zip(records, trace.records):
        assert got.k == want.k and got.branch == want.branch
        assert got.f == want.f and got.gnorm == want.gnorm
        assert got.fe == want.fe and got.re == want.re
        assert got.exact_gnorm == want.exact_gnorm


def test_cache_cleared_after_u2(monkeypatch):
    m = r.Euclidean(1)
    obj = r.Objective(lambda v: 50.0 * float(v[0] ** 2))
    cfg = r.SolverConfig(sigma0=1.0, tau0=8.0, epsilon=1.0)
    state = _state([1.0], 50.0, 8.0, 8.0)
    state, rec = r.step(state, obj, m, cfg)
    assert rec.branch == BRANCH_U2
    fe0 = state.counter.fe
    state, rec2 = r.step(state, obj, m, cfg)
    # a fresh gradient was computed (d new evaluations at least)
    assert state.counter.fe - fe0 >= m.dim
