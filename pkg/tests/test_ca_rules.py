import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cadecoders.ca_rules import (
    ORIENTATIONS,
    SquareGrid,
    TwoRowLattice,
    default_k_switch,
    orientation_schedule,
    shearing_cycle,
    shearing_majority_step,
    shearing_permutation,
    toom_run,
    toom_step,
)
from cadecoders.engine import pack_bits, unpack_words
from cadecoders.noise import PhenomenologicalParams


def cells(lat):
    return sorted(map(tuple, np.argwhere(lat.bits).tolist()))


@pytest.mark.parametrize("periodic", [True, False])
def test_zero_lattice_is_fixed(periodic):
    lat = TwoRowLattice.zeros(12, periodic)
    assert not shearing_majority_step(lat).bits.any()
    assert not shearing_cycle(lat).bits.any()
    assert not shearing_permutation(lat, "left").bits.any()


def test_isolated_one_is_flipped_back():
    lat = TwoRowLattice.zeros(20).set([(0, 5)])
    assert not shearing_majority_step(lat).bits.any()


def test_left_permutation_moves_diagonally():
    lat = TwoRowLattice.zeros(20).set([(0, 5)])
    assert cells(shearing_permutation(lat, "left")) == [(1, 4)]
    assert cells(shearing_permutation(lat, "right")) == [(1, 6)]
    mirrored = TwoRowLattice.zeros(20, diagonal=-1).set([(0, 5)])
    assert cells(shearing_permutation(mirrored, "left")) == [(1, 6)]


@given(st.integers(0, 2**16 - 1))
def test_permutations_are_involutions_not_inverse_pair(code):
    bits = np.array([(code >> i) & 1 for i in range(16)], dtype=np.uint8).reshape(2, 8)
    lat = TwoRowLattice(bits)
    for d in ("left", "right"):
        assert np.array_equal(shearing_permutation(shearing_permutation(lat, d), d).bits, bits)
    # left followed by right shears the rows relative to each other
    lr = shearing_permutation(shearing_permutation(lat, "left"), "right").bits
    assert np.array_equal(lr[0], np.roll(bits[0], -2)) and np.array_equal(lr[1], np.roll(bits[1], 2))


def test_two_by_two_block_survives_majority_step():
    lat = TwoRowLattice.zeros(20).set([(0, 5), (0, 6), (1, 5), (1, 6)])
    assert cells(shearing_majority_step(lat)) == cells(lat)


def test_wide_two_row_cluster_splits_then_erases():
    lat = TwoRowLattice.zeros(32).set([(r, i) for r in range(2) for i in range(4, 8)])
    after_one = shearing_cycle(lat)
    rows = [set(i for r, i in cells(after_one) if r == k) for k in range(2)]
    assert rows[0] and rows[1] and rows[0] != rows[1]
    for _ in range(3):
        assert lat.bits.any()
        lat = shearing_cycle(lat)
    assert not shearing_cycle(lat).bits.any()


def test_every_weight_one_error_erased_in_one_cycle():
    n = 14
    for r, i in itertools.product(range(2), range(n // 2)):
        lat = TwoRowLattice.zeros(n).set([(r, i)])
        assert not shearing_cycle(lat).bits.any(), (r, i)


def test_open_lattice_corners_need_a_second_cycle():
    n = 14
    slow = []
    for r, i in itertools.product(range(2), range(n // 2)):
        lat = shearing_cycle(TwoRowLattice.zeros(n, periodic=False).set([(r, i)]))
        if lat.bits.any():
            slow.append((r, i))
            assert not shearing_cycle(lat).bits.any()
    assert slow == [(0, 0), (1, n // 2 - 1)]


def test_shearing_packed_matches_bool(rng):
    bits = rng.random((2, 9, 64)) < 0.2
    noise = PhenomenologicalParams(0.0, 0.0)
    a = TwoRowLattice(bits.astype(np.uint8))
    b = TwoRowLattice(pack_bits(bits.astype(np.uint8)))
    for _ in range(3):
        a = shearing_cycle(a)
        b = shearing_cycle(b, noise, rng)
    assert np.array_equal(unpack_words(b.bits), a.bits)


def test_shearing_needs_even_n():
    with pytest.raises(ValueError):
        TwoRowLattice.zeros(9)


def test_toom_zero_and_single():
    g = SquareGrid.zeros(8)
    assert not toom_step(g).bits.any()
    b = g.bits.copy()
    b[4, 4] = 1
    assert not toom_step(g.with_bits(b)).bits.any()


def test_toom_block_erased_from_corner():
    g = SquareGrid.zeros(12)
    b = g.bits.copy()
    b[4:7, 3:7] = 1  # 3 x 4 block
    g = g.with_bits(b, "SW")
    steps = 0
    while g.bits.any():
        g = toom_step(g)
        steps += 1
    assert steps == 3 + 4 - 1


@pytest.mark.parametrize("orientation", ORIENTATIONS)
def test_toom_block_erased_in_every_orientation(orientation):
    g = SquareGrid.zeros(10)
    b = g.bits.copy()
    b[2:5, 3:5] = 1
    g = g.with_bits(b, orientation)
    for _ in range(10):
        g = toom_step(g)
    assert not g.bits.any()


def test_orientation_schedule():
    k = default_k_switch(32)
    assert k == 10
    assert all(orientation_schedule(t, 32) == "SW" for t in range(k))
    assert orientation_schedule(k, 32) == "SE"
    assert orientation_schedule(4 * k, 32) == "SW"
    assert orientation_schedule(5, 32, k_switch=2) == "NE"
    with pytest.raises(ValueError):
        orientation_schedule(0, 32, k_switch=0)


def test_toom_run_follows_schedule():
    g = SquareGrid.zeros(8, boundary="periodic")
    out = toom_run(g, 7)
    assert out.orientation == orientation_schedule(6, 8)


def test_toom_noise_order():
    g = SquareGrid.zeros(16)
    rng = np.random.default_rng(0)
    # every cell flipped before the vote: all cells agree, nothing is corrected
    assert toom_step(g, PhenomenologicalParams(1.0, 0.0), rng).bits.all()
    # every comparison misread: every cell sees two disagreements and flips
    assert toom_step(g, PhenomenologicalParams(0.0, 1.0), rng).bits.all()
    # isolated data flips are voted away within the same step
    out = toom_step(SquareGrid.zeros(64), PhenomenologicalParams(0.01, 0.0), rng)
    assert out.bits.mean() < 0.002
