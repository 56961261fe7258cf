import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cadecoders.engine import pack_bits
from cadecoders.montecarlo import (
    ZERO_EVENT_UPPER,
    PLCurve,
    RuleConfig,
    SignalSim,
    TrajectoryRecord,
    aggregate_records,
    convergence_time,
    estimate_logical_rate,
    p_from_rate,
    rate_from_p,
    run_trajectory,
    sample_times,
    simulate_point,
    stack_survival,
    wilson_interval,
)
from cadecoders.noise import PhenomenologicalParams, RngStream
from cadecoders.oracles import exact_logical_probability


def test_sample_times_grid():
    t = sample_times(1000)
    assert t[0] == 1 and t[-1] == 1000
    assert np.all(np.diff(t) > 0)
    assert np.array_equal(t[:256], np.arange(1, 257))
    assert np.array_equal(sample_times(40), np.arange(1, 41))


@given(st.floats(1e-7, 0.3), st.integers(1, 5000))
def test_rate_and_probability_are_inverse(eps, tau):
    p = p_from_rate(eps, tau)
    if p < 0.5 - 1e-9:
        assert math.isclose(float(rate_from_p(p, tau)), eps, rel_tol=1e-6)


def test_exact_curve_recovers_rate():
    times = sample_times(1000)
    est = estimate_logical_rate(PLCurve.exact(1e-3, times), n=9)
    assert est.eps_L == pytest.approx(1e-3, rel=1e-12)
    assert est.ci_low <= 1e-3 <= est.ci_high


def test_zero_flips_upper_bound():
    curve = PLCurve(np.array([1]), np.array([0]), 10**6)
    est = estimate_logical_rate(curve)
    assert est.censored and est.eps_L == 0.0
    # bound on P_L is ln(40)/N ~ 3.7e-6; at tau = 1 the per-step rate is twice that
    assert ZERO_EVENT_UPPER / 1e6 == pytest.approx(3.69e-6, rel=1e-3)
    assert est.ci_high == pytest.approx(2 * ZERO_EVENT_UPPER / 1e6, rel=1e-6)


def test_saturated_curve_is_censored():
    times = np.arange(1, 101)
    est = estimate_logical_rate(PLCurve(times, np.full(100, 600), 1000))
    assert est.censored and est.eps_L == 1.0


def test_convergence_time_on_asymptotic_curve():
    times = sample_times(500)
    ct = convergence_time(PLCurve.exact(2e-3, times), 2e-3)
    assert ct.tau_n == times[0] and not ct.censored


def test_convergence_time_with_delay():
    times = np.arange(1, 301)
    eps = 1e-2
    # no flips before t = 40, then the asymptotic law shifted by 40
    p = np.where(times < 40, 0.0, p_from_rate(eps, np.maximum(times - 40, 0)))
    ct = convergence_time(PLCurve(times, p * 1e9, 10**9), eps)
    r = rate_from_p(p, times)
    assert r[int(ct.tau_n) - 1] > eps / 2 and r[int(ct.tau_n) - 2] <= eps / 2
    assert 60 < ct.tau_n < 100
    with pytest.raises(ValueError):
        convergence_time(PLCurve(times, p, 1), 0.0)


@pytest.mark.parametrize("k, N", [(0, 10), (5, 10), (10, 10), (3, 10**6)])
def test_wilson_interval_contains_point(k, N):
    lo, hi = wilson_interval(k, N)
    assert 0 <= lo <= k / N <= hi <= 1


def test_stack_survival_properties():
    recs = [TrajectoryRecord(False, m) for m in [0, 0, 1, 2, 2, 5]]
    tab = stack_survival(recs)
    assert tab.survival[0] == 1.0
    assert tab.survival[1] == pytest.approx(4 / 6)
    assert tab.survival[5] == pytest.approx(1 / 6)
    assert np.all(np.diff(tab.survival) <= 0)
    zero = stack_survival(np.array([100]))
    assert zero.survival[0] == 1.0 and len(zero.survival) == 1


def test_noiseless_trajectory_never_flips():
    for rule, n in [("asr", 9), ("ssr", 9), ("shearing", 10), ("toom", 9)]:
        rec = run_trajectory(rule, n, PhenomenologicalParams(0.0, 0.0), 50, RngStream(1))
        assert not rec.flip_observed and rec.max_stack == 0


def test_weight_one_code_capacity_corrected_in_three_steps():
    n = 11
    for pos in range(n):
        sim = SignalSim(n, RuleConfig("asr"), 1)
        err = np.zeros((n, 64), dtype=np.uint8)
        err[pos, 0] = 1
        sim.load_code_capacity(pack_bits(err))
        for _ in range(3):
            sim.step(None, None)
        assert sim.all_zero() and not sim.logical()[0]
        assert not sim.data.any()


def test_ssr_trajectory_flips_sometimes():
    flips = [run_trajectory("ssr", 9, PhenomenologicalParams.uniform(0.06), 200, RngStream(4, (0, i))).flip_observed
             for i in range(40)]
    assert 0 < sum(flips) < 40


def test_run_trajectory_crossings_recorded():
    rec = run_trajectory("ssr", 5, PhenomenologicalParams.uniform(0.2), 300, RngStream(8), track_crossings=True)
    assert len(rec.first_crossing_times) % 2 == int(rec.flip_observed)
    agg = aggregate_records([rec, rec])
    assert agg["n_traj"] == 2


@pytest.mark.parametrize("rule, n", [("ssr", 9), ("shearing", 10), ("toom", 9)])
def test_simulate_point_independent_of_worker_count(rule, n):
    kw = dict(max_trials=4 * 64 * 2, budget_flips=None, seed=3, words=2)
    noise = PhenomenologicalParams.uniform(0.05)
    a = simulate_point(RuleConfig(rule), n, noise, 120, workers=1, **kw)
    b = simulate_point(RuleConfig(rule), n, noise, 120, workers=3, **kw)
    assert a.counts() == b.counts()


def test_flip_budget_stops_at_block_boundary():
    res = simulate_point(RuleConfig("ssr"), 5, PhenomenologicalParams.uniform(0.1), 100,
                         max_trials=64 * 50, budget_flips=20, seed=0, words=1)
    assert res.flips >= 20
    assert res.blocks < 50
    assert res.n_traj == 64 * res.blocks


def test_code_capacity_matches_enumeration():
    n, eps = 7, 0.2
    exact = exact_logical_probability("asr", n, eps).probability
    res = simulate_point(RuleConfig("asr"), n, PhenomenologicalParams(eps, 0.0), 77 * n,
                         max_trials=40_000, budget_flips=None, seed=5, code_capacity=True)
    est = res.rate()
    assert est.ci_low <= exact <= est.ci_high


def test_phenomenological_matches_enumeration():
    n, tau, eps = 3, 2, 0.1
    exact = exact_logical_probability("ssr", n, eps_d=eps, eps_m=eps, tau=tau).probability
    res = simulate_point(RuleConfig("ssr"), n, PhenomenologicalParams.uniform(eps), tau,
                         max_trials=100_000, budget_flips=None, seed=2)
    lo, hi = wilson_interval(int(res.curve.flips[-1]), res.n_traj)
    assert lo <= exact <= hi


def test_max_stack_within_twice_n():
    res = simulate_point(RuleConfig("ssr"), 15, PhenomenologicalParams.uniform(0.05), 300,
                         max_trials=2048, budget_flips=None, seed=1)
    assert len(res.stack_hist) - 1 <= 30


def test_rule_config_validation():
    with pytest.raises(ValueError):
        RuleConfig("mwpm")
    with pytest.raises(ValueError):
        RuleConfig("asr", k_a=2)


@pytest.mark.parametrize("eps_L", [0.005, 0.02, 0.05])
def test_rate_recovered_from_saturating_sampled_curve(eps_L):
    # binomial sampling of the asymptotic curve: late points sit at 1/2 within noise
    rng = np.random.default_rng(17)
    times = sample_times(1000)
    N = 20_000
    flips = rng.binomial(N, p_from_rate(eps_L, times))
    est = estimate_logical_rate(PLCurve(times, flips, N), n=9)
    assert est.ci_low <= eps_L <= est.ci_high
    assert est.eps_L == pytest.approx(eps_L, rel=0.1)
