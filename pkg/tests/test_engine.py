import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cadecoders import engine
from cadecoders.lattice import DecoderState, WindowOverflow, edge_bits
from cadecoders.reference import reference_asr_iteration
from cadecoders.signal_rules import SignalRuleParams, asr_iteration, window_state

from conftest import even_defect_sets


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60), st.integers(1, 5))
def test_bitcounter_matches_integers(ops, width):
    rng = np.random.default_rng(len(ops))
    c = engine.BitCounter.zeros_like(np.zeros(width, dtype=bool))
    ref = np.zeros(width, dtype=np.int64)
    for inc, _ in ops:
        mask = rng.random(width) < 0.5
        if inc:
            c.inc(mask)
            ref += mask
        else:
            mask &= ref > 0
            c.dec(mask)
            ref -= mask
        assert np.array_equal(c.values(), ref)


def test_sliced_max_over_sites():
    rng = np.random.default_rng(1)
    vals = rng.integers(0, 40, size=(7, 64))
    ctr = engine.BitCounter.zeros_like(np.zeros((7, 1), dtype=np.uint64))
    for _ in range(40):
        ctr.inc(engine.pack_bits((vals > 0).astype(np.uint8)))
        vals = np.maximum(vals - 1, 0)
    got = engine.sliced_max_over_sites([ctr])
    out = sum(engine.unpack_words(p).astype(int) << b for b, p in enumerate(got))
    expected = np.max(ctr.values(engine.unpack_words), axis=0)
    assert np.array_equal(out, expected)


def test_pack_unpack_roundtrip(rng):
    bits = (rng.random((5, 150)) < 0.3).astype(np.uint8)
    packed = engine.pack_bits(bits)
    assert packed.shape == (5, 3)
    assert np.array_equal(engine.unpack_words(packed)[:, :150], bits)


def test_window_move_raises_on_exit():
    sh = engine.Shifts(periodic=False)
    x = np.zeros(6, dtype=bool)
    x[-1] = True
    with pytest.raises(WindowOverflow):
        sh.move_right(x)
    assert np.array_equal(sh.from_left(x), np.zeros(6, dtype=bool))


def _compare(state, steps, params=SignalRuleParams()):
    a = state.copy()
    b = state.copy()
    for _ in range(steps):
        a, ma = asr_iteration(a, params)
        b, mb = reference_asr_iteration(b, params.k_a, params.k_b)
        assert np.array_equal(ma, np.array(mb, dtype=np.uint8))
        for reg in ("defects", "fws", "bws", "ans", "sta"):
            assert np.array_equal(getattr(a, reg), getattr(b, reg)), reg
        if a.is_zero():
            break


@pytest.mark.parametrize("seed", range(25))
def test_engine_matches_site_loop_reference_on_ring(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 30))
    err = (rng.random(n) < 0.25).astype(np.uint8)
    _compare(DecoderState.from_error(err), 80)


@given(even_defect_sets(max_pairs=3, max_width=14), st.integers(3, 5), st.integers(2, 4))
def test_engine_matches_reference_in_window(sigma, ka, kb):
    _compare(window_state(sigma), 80 * (sigma[-1] - sigma[0]), SignalRuleParams(ka, kb))


@pytest.mark.parametrize("symmetric", [False, True])
def test_packed_lanes_match_boolean_runs(symmetric):
    rng = np.random.default_rng(7)
    n, lanes = 13, 64
    errors = rng.random((n, lanes)) < 0.2
    sh = engine.Shifts(periodic=True)
    step = engine.ssr_step if symmetric else engine.asr_step
    ndir = 2 if symmetric else 1

    pb = engine.Planes.zeros((n, lanes), ndir, dtype=bool)
    pb.defects = engine.syndrome_plane(errors, sh)
    pw = engine.Planes.zeros((n, 1), ndir)
    pw.defects = engine.syndrome_plane(engine.pack_bits(errors.astype(np.uint8)), sh)
    for _ in range(60):
        cb = step(pb, sh)
        cw = step(pw, sh)
        assert np.array_equal(engine.unpack_words(cw).astype(bool), cb)
        assert np.array_equal(engine.unpack_words(pw.defects).astype(bool), pb.defects)


def test_zero_state_is_fixed_point():
    st0 = DecoderState.from_error(edge_bits(16, []))
    st1, mask = asr_iteration(st0)
    assert st1.is_zero() and not mask.any()
