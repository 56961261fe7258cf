"""Memoryless decoders: the shearing rule on two rows and Toom's rule on a square grid.

Both rules store one qubit value per vertex and update by local majority votes,
so they need no classical memory. All step functions accept arrays with extra
trailing batch axes (``bool`` or packed ``uint64`` lanes) and treat them
element-wise, which lets the Monte-Carlo driver run many trajectories at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .noise import PhenomenologicalParams, bernoulli_words

Direction = Literal["left", "right"]
ORIENTATIONS = ("SW", "SE", "NE", "NW")


def _flips(rng, shape, p, dtype):
    """Independent flip mask of a given dtype (``bool`` or packed ``uint64``)."""
    if dtype == np.uint64:
        return bernoulli_words(rng, shape, p)
    if p <= 0:
        return np.zeros(shape, dtype=dtype)
    return (rng.random(shape) < p).astype(dtype)


# -- shearing rule -------------------------------------------------------------


@dataclass(frozen=True)
class TwoRowLattice:
    """Qubits on ``Z_2 x Z_{n/2}``: ``bits[r, i]`` is vertex ``(r, i)``.

    ``diagonal`` selects which of the two mirror-image permutation conventions
    is used (``+1``: left moves ``(0, i) <-> (1, i - 1)``; ``-1``: the reflection).
    """

    bits: np.ndarray
    periodic: bool = True
    diagonal: int = 1

    def __post_init__(self):
        if self.bits.shape[0] != 2:
            raise ValueError("a two-row lattice needs a leading axis of length 2")
        if self.diagonal not in (1, -1):
            raise ValueError("diagonal must be +1 or -1")

    @classmethod
    def zeros(cls, n: int, periodic: bool = True, batch: tuple = (), dtype=np.uint8, diagonal: int = 1) -> "TwoRowLattice":
        if n % 2 or n < 4:
            raise ValueError(f"the shearing rule needs an even n >= 4, got {n}")
        return cls(np.zeros((2, n // 2) + tuple(batch), dtype=dtype), periodic, diagonal)

    @property
    def half_n(self) -> int:
        return self.bits.shape[1]

    @property
    def n(self) -> int:
        return 2 * self.half_n

    def with_bits(self, bits) -> "TwoRowLattice":
        return replace(self, bits=bits)

    def set(self, cells) -> "TwoRowLattice":
        b = self.bits.copy()
        for r, i in cells:
            b[r, i % self.half_n] ^= 1
        return self.with_bits(b)


def _prev(x, periodic: bool, axis: int):
    """``out[..., i, ...] = x[..., i - 1, ...]`` along ``axis`` (zero-filled if not periodic)."""
    if periodic:
        return np.roll(x, 1, axis=axis)
    out = np.zeros_like(x)
    sl_dst = [slice(None)] * x.ndim
    sl_src = [slice(None)] * x.ndim
    sl_dst[axis] = slice(1, None)
    sl_src[axis] = slice(None, -1)
    out[tuple(sl_dst)] = x[tuple(sl_src)]
    return out


def _next(x, periodic: bool, axis: int):
    """``out[..., i, ...] = x[..., i + 1, ...]`` along ``axis``."""
    if periodic:
        return np.roll(x, -1, axis=axis)
    out = np.zeros_like(x)
    sl_dst = [slice(None)] * x.ndim
    sl_src = [slice(None)] * x.ndim
    sl_dst[axis] = slice(None, -1)
    sl_src[axis] = slice(1, None)
    out[tuple(sl_dst)] = x[tuple(sl_src)]
    return out


def _edge_valid(x, periodic: bool, axis: int, side: str):
    """Mask that is zero on the boundary cells lacking a neighbour on ``side``."""
    m = np.ones(x.shape[axis], dtype=bool)
    if not periodic:
        m[0 if side == "prev" else -1] = False
    shape = [1] * x.ndim
    shape[axis] = x.shape[axis]
    return m.reshape(shape)


def shearing_majority_step(lat: TwoRowLattice, noise: PhenomenologicalParams | None = None, rng=None) -> TwoRowLattice:
    """Step (i): each qubit flips iff it fails both of its checks.

    A top qubit ``(0, i)`` is checked against ``(1, i)`` and ``(0, i - 1)``; a
    bottom qubit ``(1, i)`` against ``(0, i)`` and ``(1, i - 1)`` (``(1, i + 1)``
    on a non-periodic lattice). The vertical check is shared by both rows. With
    ``noise``, data flips are applied first and every check result is then
    flipped independently with probability ``eps_m``.
    """
    x = lat.bits
    p = lat.periodic
    if noise is not None:
        x = x ^ _flips(rng, x.shape, noise.eps_d, x.dtype)
    top, bot = x[0], x[1]
    vert = top ^ bot
    h_top = (top ^ _prev(top, p, 0)) & _as(_edge_valid(top, p, 0, "prev"), top)
    if p:
        h_bot = bot ^ _prev(bot, p, 0)
    else:
        h_bot = (bot ^ _next(bot, p, 0)) & _as(_edge_valid(bot, p, 0, "next"), bot)
    if noise is not None and noise.eps_m > 0:
        vert = vert ^ _flips(rng, vert.shape, noise.eps_m, x.dtype)
        h_top = h_top ^ _flips(rng, vert.shape, noise.eps_m, x.dtype)
        h_bot = h_bot ^ _flips(rng, vert.shape, noise.eps_m, x.dtype)
    out = np.stack([top ^ (vert & h_top), bot ^ (vert & h_bot)])
    return lat.with_bits(out)


def _as(mask, like):
    """Broadcastable all-ones/all-zeros version of a boolean mask in ``like``'s dtype."""
    if like.dtype == np.uint64:
        return np.where(mask, np.uint64(2**64 - 1), np.uint64(0))
    return mask.astype(like.dtype)


def shearing_permutation(lat: TwoRowLattice, direction: Direction, noise: PhenomenologicalParams | None = None, rng=None) -> TwoRowLattice:
    """Diagonal swap of the two rows.

    ``left`` swaps ``(0, i) <-> (1, i - 1)``, ``right`` swaps ``(0, i) <-> (1, i + 1)``
    (mirrored when ``lat.diagonal == -1``). On an open lattice the unpaired end
    qubits stay put. Data flips follow the permutation in noisy mode.
    """
    if direction not in ("left", "right"):
        raise ValueError(f"direction must be 'left' or 'right', got {direction!r}")
    shift = -1 if direction == "left" else 1
    shift *= lat.diagonal
    x = lat.bits
    h = lat.half_n
    top, bot = x[0].copy(), x[1].copy()
    new_top, new_bot = top.copy(), bot.copy()
    if lat.periodic:
        new_top = np.roll(bot, -shift, axis=0)  # top[i] <- bot[i + shift]
        new_bot = np.roll(top, shift, axis=0)  # bot[j] <- top[j - shift]
    else:
        idx = np.arange(h)
        partner = idx + shift
        ok = (partner >= 0) & (partner < h)
        new_top[idx[ok]] = bot[partner[ok]]
        new_bot[partner[ok]] = top[idx[ok]]
    out = np.stack([new_top, new_bot])
    if noise is not None:
        out = out ^ _flips(rng, out.shape, noise.eps_d, out.dtype)
    return lat.with_bits(out)


SHEARING_CYCLE = ("majority", "left", "majority", "right")


def shearing_substep(lat: TwoRowLattice, phase: int, noise=None, rng=None) -> TwoRowLattice:
    """Apply substep ``phase`` (0..3) of the cycle (i), (ii), (i), (iii)."""
    kind = SHEARING_CYCLE[phase % 4]
    if kind == "majority":
        return shearing_majority_step(lat, noise, rng)
    return shearing_permutation(lat, kind, noise, rng)


def shearing_cycle(lat: TwoRowLattice, noise: PhenomenologicalParams | None = None, rng=None) -> TwoRowLattice:
    """One full cycle: majority, left permutation, majority, right permutation."""
    for phase in range(4):
        lat = shearing_substep(lat, phase, noise, rng)
    return lat


# -- Toom's rule -----------------------------------------------------------------


def default_k_switch(side: int, c: float = 2.0) -> int:
    """Steps spent in each orientation, ``ceil(c * log2(side))`` (at least 1)."""
    return max(1, math.ceil(c * math.log2(side))) if side > 1 else 1


def orientation_schedule(t: int, side: int, k_switch: int | None = None, c: float = 2.0) -> str:
    """Orientation used at step ``t``: the four diagonal orientations in turn, ``k_switch`` steps each."""
    k = default_k_switch(side, c) if k_switch is None else k_switch
    if k < 1:
        raise ValueError("k_switch must be >= 1")
    return ORIENTATIONS[(t // k) % 4]


@dataclass(frozen=True)
class SquareGrid:
    """``side x side`` qubits; ``bits[y, x]`` with ``y`` growing northward and ``x`` eastward.

    ``boundary`` is ``"agree"`` (missing neighbours never cause a flip) or
    ``"periodic"`` (torus).
    """

    bits: np.ndarray
    orientation: str = "SW"
    k_switch: int = 1
    boundary: str = "agree"

    def __post_init__(self):
        if self.bits.shape[0] != self.bits.shape[1]:
            raise ValueError("grid must be square")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.boundary not in ("agree", "periodic"):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")

    @classmethod
    def zeros(cls, side: int, batch: tuple = (), dtype=np.uint8, c: float = 2.0, boundary: str = "agree") -> "SquareGrid":
        return cls(np.zeros((side, side) + tuple(batch), dtype=dtype), "SW", default_k_switch(side, c), boundary)

    @property
    def side(self) -> int:
        return self.bits.shape[0]

    @property
    def n(self) -> int:
        return self.side ** 2

    def with_bits(self, bits, orientation: str | None = None) -> "SquareGrid":
        return replace(self, bits=bits, orientation=orientation or self.orientation)


def _toom_checks(x, orientation: str, periodic: bool):
    """The two comparison bits (1 = disagree) for every cell in ``orientation``."""
    ns, ew = orientation[0], orientation[1]
    if ns == "S":
        vy = _prev(x, periodic, 0)
        valid_y = _edge_valid(x, periodic, 0, "prev")
    else:
        vy = _next(x, periodic, 0)
        valid_y = _edge_valid(x, periodic, 0, "next")
    if ew == "W":
        vx = _prev(x, periodic, 1)
        valid_x = _edge_valid(x, periodic, 1, "prev")
    else:
        vx = _next(x, periodic, 1)
        valid_x = _edge_valid(x, periodic, 1, "next")
    cy = (x ^ vy) & _as(valid_y, x)
    cx = (x ^ vx) & _as(valid_x, x)
    return cy, cx


def toom_step(grid: SquareGrid, noise: PhenomenologicalParams | None = None, rng=None) -> SquareGrid:
    """Flip every cell that disagrees with both neighbours of its current orientation.

    With ``noise`` the data flips are applied first, then each of the two
    comparisons of each cell is independently wrong with probability ``eps_m``.
    """
    x = grid.bits
    if noise is not None:
        x = x ^ _flips(rng, x.shape, noise.eps_d, x.dtype)
    cy, cx = _toom_checks(x, grid.orientation, grid.boundary == "periodic")
    if noise is not None and noise.eps_m > 0:
        cy = cy ^ _flips(rng, x.shape, noise.eps_m, x.dtype)
        cx = cx ^ _flips(rng, x.shape, noise.eps_m, x.dtype)
    return grid.with_bits(x ^ (cy & cx))


def toom_run(grid: SquareGrid, steps: int, t0: int = 0, noise=None, rng=None, schedule: bool = True) -> SquareGrid:
    """Apply ``steps`` Toom steps starting at time ``t0``, following the orientation schedule."""
    for t in range(t0, t0 + steps):
        if schedule:
            grid = grid.with_bits(grid.bits, ORIENTATIONS[(t // grid.k_switch) % 4])
        grid = toom_step(grid, noise, rng)
    return grid
