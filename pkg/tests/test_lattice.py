import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cadecoders.lattice import (
    DecoderState,
    Ring,
    SiteRegisters,
    StackOverflow,
    Window,
    complement,
    defects_from_error,
    defects_from_line_error,
    edge_bits,
    logical_state,
    prefix_charge,
    site_charge,
    syndrome_bits,
    total_charge,
)
from cadecoders.signal_rules import asr_iteration, window_state


@pytest.mark.parametrize(
    "error, expected",
    [
        (np.zeros(8, dtype=np.uint8), []),
        (edge_bits(8, [3]), [3, 4]),
        (np.ones(8, dtype=np.uint8), []),
    ],
)
def test_defects_from_error_examples(error, expected):
    assert defects_from_error(error) == expected


@given(st.lists(st.integers(0, 1), min_size=3, max_size=40))
def test_syndrome_is_even_and_complement_invariant(bits):
    e = np.array(bits, dtype=np.uint8)
    s = syndrome_bits(e)
    assert s.sum() % 2 == 0
    assert np.array_equal(s, syndrome_bits(complement(e)))


def test_line_error_boundary():
    assert defects_from_line_error([3]) == [3, 4]
    assert defects_from_line_error([3, 4]) == [3, 5]


@pytest.mark.parametrize("ones, n, expected", [(0, 9, 0), (9, 9, 1), (5, 9, 1), (4, 9, 0)])
def test_logical_state_majority(ones, n, expected):
    e = np.zeros(n, dtype=np.uint8)
    e[:ones] = 1
    assert logical_state(e) == expected


@pytest.mark.parametrize(
    "regs, q",
    [
        (SiteRegisters(), 0),
        (SiteRegisters(fws=1, sta=1), 0),
        (SiteRegisters(bws=1, ans=1, sta=2), -2),
    ],
)
def test_site_charge_definition(regs, q):
    assert regs.charge() == q


def test_window_for_defects_and_indexing():
    w = Window.for_defects([10, 16])
    assert (w.lo, w.hi) == (8, 10 + 80 * 6)
    st = DecoderState.from_defects([10, 16])
    assert st.defect_set() == [10, 16]
    assert st.index(10) == 2
    with pytest.raises(ValueError):
        Window(3, 3)


def test_prefix_charge_examples():
    zero = window_state([0, 4])
    assert all(prefix_charge(zero, z) == 0 for z in range(-2, 10))
    st, _ = asr_iteration(window_state([0, 4]))
    # stack increment at 0, its forward-signal already at 1
    assert prefix_charge(st, 1) == -1
    assert prefix_charge(st, 20) == 0
    assert total_charge(st) == 0
    assert site_charge(st, 0) == -1 and site_charge(st, 1) == 1


def test_prefix_charge_on_ring_needs_cut():
    st = DecoderState.from_error(edge_bits(12, [3]))
    with pytest.raises(ValueError):
        prefix_charge(st, 5)
    assert prefix_charge(st, 5, cut=0) == 0


def test_state_copy_is_independent():
    st = DecoderState.from_error(edge_bits(10, [2, 3]))
    cp = st.copy()
    cp.defects[0, 2] = 0
    assert st.defects[0, 2] == 1
    assert isinstance(st.topology, Ring)


def test_stack_check_hard_cap():
    st = DecoderState.zeros(Ring(5))
    st.sta[0, 1] = 11
    with pytest.raises(StackOverflow):
        st.check_stacks()
