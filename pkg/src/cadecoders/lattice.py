"""Errors, syndromes and decoder registers on ring and windowed-line lattices.

Conventions used throughout the package:

* edge ``i`` joins vertices ``i`` and ``i + 1`` (mod ``n`` on a ring);
* a vertex is a defect when its two incident edges carry different values;
* a correction attributed to site ``c`` flips edge ``c``, i.e. ``(c, c + 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Union

import numpy as np

DEFAULT_SOFT_STACK_CAP = 255


class LatticeError(RuntimeError):
    """Base class for invariant violations detected while stepping a decoder."""


class WindowOverflow(LatticeError):
    """A signal was moved across the boundary of a windowed lattice."""


class StackOverflow(LatticeError):
    """A stack register exceeded its hard (2n) or soft cap."""


@dataclass(frozen=True)
class Ring:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"ring needs at least 2 sites, got {self.n}")

    @property
    def size(self) -> int:
        return self.n

    @property
    def offset(self) -> int:
        return 0

    @property
    def periodic(self) -> bool:
        return True


@dataclass(frozen=True)
class Window:
    """Finite stretch ``[lo, hi]`` (inclusive) of the infinite line Z."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ValueError(f"empty window [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def offset(self) -> int:
        return self.lo

    @property
    def periodic(self) -> bool:
        return False

    @classmethod
    def for_defects(cls, sigma: Iterable[int]) -> "Window":
        """Window ``[s1 - 2, s1 + 80 * width]`` large enough for the linear-erasure bounds."""
        s = sorted(sigma)
        width = max(s[-1] - s[0], 1)
        return cls(s[0] - 2, s[0] + 80 * width)


Topology = Union[Ring, Window]


def as_bits(bits, n: int | None = None) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8) & 1
    if arr.ndim != 1:
        raise ValueError("edge bits must be one-dimensional")
    if n is not None and arr.size != n:
        raise ValueError(f"expected {n} bits, got {arr.size}")
    return arr


def edge_bits(n: int, errors: Iterable[int] = ()) -> np.ndarray:
    """Length-``n`` error vector with the listed edges set."""
    out = np.zeros(n, dtype=np.uint8)
    for e in errors:
        out[e % n] ^= 1
    return out


def complement(error) -> np.ndarray:
    return as_bits(error) ^ 1


def syndrome_bits(error) -> np.ndarray:
    """Per-vertex parity of the two incident edges on a ring."""
    e = as_bits(error)
    return e ^ np.roll(e, 1)


def defects_from_error(error) -> list[int]:
    """Sorted defect vertices (the boundary) of an error on a ring."""
    return np.flatnonzero(syndrome_bits(error)).tolist()


def defects_from_line_error(edges: Iterable[int]) -> list[int]:
    """Boundary of a finite error set on the infinite line (edge ``i`` = ``(i, i+1)``)."""
    parity: dict[int, int] = {}
    for e in edges:
        for v in (e, e + 1):
            parity[v] = parity.get(v, 0) ^ 1
    return sorted(v for v, p in parity.items() if p)


def logical_state(data) -> int:
    """Majority vote: 1 iff strictly more than half the data bits are 1."""
    d = as_bits(data)
    return int(2 * int(d.sum()) > d.size)


@dataclass
class SiteRegisters:
    """Registers of one site for one signal direction."""

    defect: int = 0
    fws: int = 0
    bws: int = 0
    ans: int = 0
    sta: int = 0

    def charge(self) -> int:
        return self.fws + self.bws - self.ans - self.sta


@dataclass
class DecoderState:
    """Full decoder configuration.

    Register arrays have shape ``(ndir, size)``: one row per signal direction
    (1 for the asymmetric rule, 2 for the symmetric one). Index ``j`` of a row is
    vertex ``topology.offset + j``.
    """

    topology: Topology
    defects: np.ndarray
    fws: np.ndarray
    bws: np.ndarray
    ans: np.ndarray
    sta: np.ndarray
    data: np.ndarray | None = None
    t: int = 0
    soft_cap: int = DEFAULT_SOFT_STACK_CAP

    @classmethod
    def zeros(cls, topology: Topology, ndir: int = 1, with_data: bool | None = None) -> "DecoderState":
        shape = (ndir, topology.size)
        if with_data is None:
            with_data = topology.periodic
        data = np.zeros(topology.size, dtype=np.uint8) if with_data else None
        return cls(
            topology=topology,
            defects=np.zeros(shape, dtype=np.uint8),
            fws=np.zeros(shape, dtype=np.uint8),
            bws=np.zeros(shape, dtype=np.uint8),
            ans=np.zeros(shape, dtype=np.uint8),
            sta=np.zeros(shape, dtype=np.int64),
            data=data,
        )

    @classmethod
    def from_error(cls, error, ndir: int = 1) -> "DecoderState":
        """Ring state with ``error`` on the data and its syndrome loaded into ``Def``."""
        e = as_bits(error)
        st = cls.zeros(Ring(e.size), ndir)
        st.data = e.copy()
        st.defects[:] = syndrome_bits(e)
        return st

    @classmethod
    def from_defects(cls, sigma: Iterable[int], topology: Topology | None = None, ndir: int = 1) -> "DecoderState":
        sigma = sorted(set(sigma))
        if topology is None:
            topology = Window.for_defects(sigma)
        st = cls.zeros(topology, ndir, with_data=False)
        for s in sigma:
            st.defects[:, st.index(s)] = 1
        return st

    @property
    def ndir(self) -> int:
        return self.defects.shape[0]

    @property
    def n(self) -> int:
        return self.topology.size

    def index(self, vertex: int) -> int:
        if self.topology.periodic:
            return vertex % self.topology.size
        j = vertex - self.topology.offset
        if not 0 <= j < self.topology.size:
            raise IndexError(f"vertex {vertex} outside window {self.topology}")
        return j

    def vertices(self) -> np.ndarray:
        return np.arange(self.topology.size) + self.topology.offset

    def copy(self) -> "DecoderState":
        return replace(
            self,
            defects=self.defects.copy(),
            fws=self.fws.copy(),
            bws=self.bws.copy(),
            ans=self.ans.copy(),
            sta=self.sta.copy(),
            data=None if self.data is None else self.data.copy(),
        )

    def site(self, vertex: int, direction: int = 0) -> SiteRegisters:
        j = self.index(vertex)
        return SiteRegisters(
            int(self.defects[direction, j]),
            int(self.fws[direction, j]),
            int(self.bws[direction, j]),
            int(self.ans[direction, j]),
            int(self.sta[direction, j]),
        )

    def defect_set(self, direction: int = 0) -> list[int]:
        return (np.flatnonzero(self.defects[direction]) + self.topology.offset).tolist()

    def support(self) -> list[int]:
        """Vertices carrying any nonzero register (all directions)."""
        occ = (self.defects | self.fws | self.bws | self.ans).any(axis=0) | (self.sta > 0).any(axis=0)
        return (np.flatnonzero(occ) + self.topology.offset).tolist()

    def is_zero(self) -> bool:
        return not self.support()

    def charges(self, direction: int = 0) -> np.ndarray:
        """Per-site charge: +1 per forward/backward signal, -1 per anti-signal and stack unit."""
        d = direction
        return (
            self.fws[d].astype(np.int64) + self.bws[d] - self.ans[d] - self.sta[d]
        )

    def check_stacks(self) -> None:
        top = int(self.sta.max(initial=0))
        hard = 2 * self.topology.size
        if top > hard:
            raise StackOverflow(f"stack height {top} exceeds 2n = {hard}")
        if top > self.soft_cap:
            raise StackOverflow(f"stack height {top} exceeds soft cap {self.soft_cap}")


def site_charge(state: DecoderState, i: int, direction: int = 0) -> int:
    return state.site(i, direction).charge()


def total_charge(state: DecoderState, direction: int = 0) -> int:
    return int(state.charges(direction).sum())


def prefix_charge(state: DecoderState, z: int, direction: int = 0, cut: int | None = None) -> int:
    """Total charge on sites strictly left of ``z``.

    On a window the sum runs from the left window edge. A ring has no natural
    origin, so the caller must give a ``cut`` vertex; the sum then runs over the
    arc ``cut, cut + 1, ..., z - 1``.
    """
    q = state.charges(direction)
    if state.topology.periodic:
        if cut is None:
            raise ValueError("prefix charge on a ring needs an explicit cut vertex")
        n = state.topology.size
        length = (z - cut) % n
        idx = (cut + np.arange(length)) % n
        return int(q[idx].sum())
    j = z - state.topology.offset
    j = min(max(j, 0), state.topology.size)
    return int(q[:j].sum())
