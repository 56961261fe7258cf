import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings

from cadecoders.oracles import (
    ChunkGuardError,
    MAX_ENUM_BITS,
    check_charge_facts,
    check_frontier_lemmas,
    check_recombination_lemma,
    chunk_decomposition,
    erasure_campaign,
    erasure_certificate,
    exact_logical_probability,
    minimal_failing_errors,
    random_defect_sets,
    threshold_bound,
    track_frontier,
)
from cadecoders.signal_rules import asr_run, window_state

from conftest import even_defect_sets


def _trace(sigma, slack=80):
    return asr_run(window_state(sigma), t_max=slack * (sigma[-1] - sigma[0]), stop_when_zero=True)


# -- erasure ---------------------------------------------------------------------------


def test_adjacent_pair_erased_in_one_step():
    cert = erasure_certificate([3, 4])
    assert cert.passed and cert.t_zero == 1


def test_single_cluster_erased_within_three_widths():
    cert = erasure_certificate([0, 6])
    assert cert.passed and cert.t_zero <= 18


def test_erasure_rejects_odd_sets():
    with pytest.raises(ValueError):
        erasure_certificate([1, 2, 3])


def _all_small_sets(width=12, max_pairs=2):
    for m in range(1, max_pairs + 1):
        for inner in itertools.combinations(range(1, width + 1), 2 * m - 1):
            yield [0, *inner]


def test_exhaustive_small_sets_pass():
    sets = list(_all_small_sets())
    assert len(sets) == 12 + math.comb(12, 3)
    rep = erasure_campaign(sets)
    assert rep.n_pass == len(sets)
    assert rep.charge.ok


def test_campaign_agrees_with_single_certificates():
    sets = random_defect_sets(60, max_pairs=3, max_width=25, seed=4)
    rep = erasure_campaign(sets)
    for s, case in zip(sets, rep.cases):
        cert = erasure_certificate(s)
        assert cert.t_zero == case.t_zero
        assert cert.max_support_right == case.max_support_right
        assert cert.passed == case.erasure_pass


def test_random_defect_sets_shape():
    sets = random_defect_sets(200, max_pairs=4, max_width=50, seed=1)
    assert len(sets) == 200
    for s in sets:
        assert s[0] == 0 and len(s) % 2 == 0 and len(s) <= 8 and s[-1] <= 50
        assert len(set(s)) == len(s)


# -- charges --------------------------------------------------------------------------------


@settings(max_examples=60)
@given(even_defect_sets(max_pairs=3, max_width=30))
def test_charge_facts_on_noiseless_traces(sigma):
    rep = check_charge_facts(_trace(sigma))
    assert rep.ok, [v.as_dict() for v in rep.violations]


def test_deleted_anti_signal_breaks_total_charge():
    tr = _trace([0, 9])
    frames, sites = np.nonzero(tr.ans[:, 0])
    f, j = int(frames[0]), int(sites[0])
    tr.ans[f, 0, j] -= 1
    rep = check_charge_facts(tr)
    assert not rep.ok
    first = rep.violations[0]
    assert first.check == "total" and first.step == int(tr.times[f])


# -- frontier ----------------------------------------------------------------------------------


def test_frontier_single_pair_reaches_right_defect_at_width():
    delta = 9
    ft = track_frontier(_trace([0, delta]))
    # the frontier rides the first forward-signal one site per step; the signal
    # displaces the right defect onto site delta - 1 at t = delta, which ends tracking
    assert ft.phi == list(range(delta))
    assert ft.terminated_at == delta - 1
    assert _trace([0, delta]).defect_sets()[delta] == [0, delta - 1]


@settings(max_examples=60)
@given(even_defect_sets(max_pairs=3, max_width=40))
def test_frontier_monotone_and_fast(sigma):
    tr = _trace(sigma)
    ft = track_frontier(tr)
    assert ft.phi[0] == min(sigma)
    assert ft.is_monotone()
    rep = check_frontier_lemmas(tr, ft)
    # region conditions can fail on some sets (see the decisions ledger); the
    # monotonicity and average-speed bounds must not
    assert not [v for v in rep.violations if v.check in ("monotone", "speed")]


def test_frontier_needs_dense_trace():
    tr = asr_run(window_state([0, 4]), t_max=20, stride=2)
    with pytest.raises(ValueError):
        track_frontier(tr)


@pytest.mark.parametrize("sigma", [[0, 5], [0, 12], [0, 3, 9, 14], [0, 20, 22, 30]])
def test_recombination_lemma_for_wide_pairs(sigma):
    assert check_recombination_lemma(_trace(sigma)).ok


def test_recombination_lemma_fails_for_narrow_residue():
    # when the final pair is at distance 2 a forward- and an anti-signal share a
    # site at the last step; the residue outlives the 5 delta window
    rep = check_recombination_lemma(_trace([0, 2]))
    assert not rep.ok


# -- chunks ----------------------------------------------------------------------------------------


def test_single_error_is_level_zero():
    dec = chunk_decomposition([7])
    assert dec.m == 0 and dec.F[0] == [7] and not dec.violations


def test_far_pair_stays_level_zero():
    dec = chunk_decomposition([0, 4])  # distance 4 > L/2 = 3
    assert dec.m == 0 and dec.F[0] == [0, 4]


def test_close_pair_forms_level_one_chunk():
    dec = chunk_decomposition([0, 3])
    assert dec.m == 1 and dec.F[0] == [] and dec.levels[1] == [0, 3]


def test_ring_distance_wraps():
    e = np.zeros(20, dtype=np.uint8)
    e[[0, 19]] = 1
    dec = chunk_decomposition(e)
    assert dec.n == 20 and dec.levels[1] == [0, 19]


def test_separation_counterexample_is_recorded():
    errs = [10, 16, 17, 20, 22, 33, 34, 50, 51, 52, 63]
    dec = chunk_decomposition(errs)
    assert any(kind == "separation" and lvl == 1 and 52 in comp for lvl, comp, kind, _, _ in dec.violations)
    with pytest.raises(AssertionError):
        chunk_decomposition(errs, strict=True)


def test_chunk_guard_and_L_validation():
    with pytest.raises(ChunkGuardError):
        chunk_decomposition(list(range(40)), max_chunks=50)
    with pytest.raises(ValueError):
        chunk_decomposition([1, 2], L=4)


# -- threshold bound -------------------------------------------------------------------------------------


def test_threshold_constants():
    b = threshold_bound(100, 1e-3)
    assert b.eps_th == pytest.approx(1 / 232) and b.eps_th > 0.004
    assert b.alpha_star == pytest.approx(math.log(2) / math.log(232)) and b.alpha_star > 0.12


@pytest.mark.parametrize("n", [1, 50, 231])
def test_small_n_bound_is_linear(n):
    eps = 1e-3
    assert threshold_bound(n, eps).M == 0
    assert threshold_bound(n, eps).bound == pytest.approx(n * eps)
    assert threshold_bound(n, 2 * eps).bound == pytest.approx(2 * n * eps)


def test_bound_levels_and_vacuity():
    b = threshold_bound(232**2, 1e-3)
    assert b.M == 2
    assert b.bound == pytest.approx(232**2 * 232.0**-3 * (0.232) ** 4)
    assert threshold_bound(10, 0.01).vacuous
    with pytest.raises(ValueError):
        threshold_bound(10, 1e-3, L=100)


# -- exact enumeration -------------------------------------------------------------------------------------


@pytest.mark.parametrize("rule", ["asr", "ssr"])
def test_exact_noiseless_is_zero(rule):
    assert exact_logical_probability(rule, 5, 0.0).probability == 0.0
    assert exact_logical_probability(rule, 3, eps_d=0.0, eps_m=0.0, tau=2).probability == 0.0


def test_exact_n5_has_no_linear_term():
    res = exact_logical_probability("asr", 5, 0.1)
    assert res.fail_by_weight[0] == 0 and res.fail_by_weight[1] == 0
    assert res.patterns == 32


def test_exact_half_noise_is_failure_fraction():
    res = exact_logical_probability("asr", 5, 0.5)
    assert res.probability == pytest.approx(res.fail_by_weight.sum() / 32, abs=1e-15)


def test_exact_phenomenological_is_a_probability():
    p = exact_logical_probability("ssr", 3, eps_d=0.1, eps_m=0.2, tau=2).probability
    assert 0 < p < 0.5


def test_exact_guards():
    with pytest.raises(ValueError):
        exact_logical_probability("toom", 4, 0.1)
    with pytest.raises(ValueError):
        exact_logical_probability("asr", MAX_ENUM_BITS + 1, 0.1)
    with pytest.raises(ValueError):
        exact_logical_probability("asr", 4, eps_d=0.1, eps_m=0.1, tau=3)


def test_minimal_failing_errors_n7():
    w, pats = minimal_failing_errors(7, "asr")
    assert w == 3 and len(pats) == 7
    assert all(len(p) == 3 for p in pats)
