"""Bit-plane kernels for the signal rules.

Every register is a *plane*: an array whose first axis runs over lattice sites
and whose trailing axes hold independent configurations. A plane is either a
``bool`` array (one configuration per element) or a ``uint64`` array holding 64
configurations per word, so a synchronous substep is a handful of whole-array
bitwise operations regardless of the layout. Stacks are bit-sliced counters
(one plane per binary digit) that grow a digit on carry-out.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import StackOverflow, WindowOverflow


def _or_reduce(planes):
    out = planes[0].copy()
    for p in planes[1:]:
        out |= p
    return out


class BitCounter:
    """Bit-sliced unsigned counter, one plane per binary digit (LSB first)."""

    __slots__ = ("planes",)

    def __init__(self, planes):
        self.planes = list(planes)

    @classmethod
    def zeros_like(cls, plane, digits: int = 1) -> "BitCounter":
        return cls([np.zeros_like(plane) for _ in range(digits)])

    def copy(self) -> "BitCounter":
        return BitCounter([p.copy() for p in self.planes])

    def nonzero(self):
        return _or_reduce(self.planes)

    def inc(self, mask) -> None:
        carry = mask
        for i, p in enumerate(self.planes):
            self.planes[i] = p ^ carry
            carry = p & carry
        if carry.any():
            self.planes.append(carry)

    def dec(self, mask) -> None:
        """Decrement where ``mask`` is set; callers guarantee those counters are > 0."""
        borrow = mask
        for i, p in enumerate(self.planes):
            self.planes[i] = p ^ borrow
            borrow = ~p & borrow

    def trim(self) -> None:
        while len(self.planes) > 1 and not self.planes[-1].any():
            self.planes.pop()

    def values(self, unpack=None) -> np.ndarray:
        """Integer values; ``unpack`` maps a plane to a 0/1 array (identity for bool planes)."""
        out = None
        for b, p in enumerate(self.planes):
            bits = (p if unpack is None else unpack(p)).astype(np.int64)
            out = bits << b if out is None else out + (bits << b)
        return out


def sliced_max_over_sites(counters):
    """Per-configuration maximum over all sites of several counters, bit-sliced.

    Returns a list of planes (LSB first) with the site axis reduced away.
    """
    nb = max(len(c.planes) for c in counters)
    stacked = []
    for b in range(nb):
        parts = [c.planes[b] if b < len(c.planes) else np.zeros_like(c.planes[0]) for c in counters]
        stacked.append(np.concatenate(parts, axis=0))
    cand = ~np.zeros_like(stacked[0])
    out = [None] * nb
    for b in reversed(range(nb)):
        pb = stacked[b]
        anyhit = np.bitwise_or.reduce(pb & cand, axis=0)
        out[b] = anyhit
        cand &= pb | ~anyhit
    return out


def sliced_max(a, b):
    """Element-wise maximum of two bit-sliced numbers."""
    width = max(len(a), len(b))
    zero = np.zeros_like(a[0] if a else b[0])
    a = list(a) + [zero] * (width - len(a))
    b = list(b) + [zero] * (width - len(b))
    gt = zero.copy()
    eq = ~zero
    for i in reversed(range(width)):
        gt |= eq & a[i] & ~b[i]
        eq &= ~(a[i] ^ b[i])
    return [(gt & x) | (~gt & y) for x, y in zip(a, b)]


class Shifts:
    """Neighbour reads and signal moves along the site axis.

    ``from_left(x)[i] == x[i - 1]`` and ``from_right(x)[i] == x[i + 1]``. On a
    window, reads past the edge see zeros while *moves* that would push a set
    bit off the window raise :class:`WindowOverflow`.
    """

    def __init__(self, periodic: bool):
        self.periodic = periodic

    def from_left(self, x):
        out = np.empty_like(x)
        out[1:] = x[:-1]
        if self.periodic:
            out[0] = x[-1]
        else:
            out[0] = 0
        return out

    def from_right(self, x):
        out = np.empty_like(x)
        out[:-1] = x[1:]
        if self.periodic:
            out[-1] = x[0]
        else:
            out[-1] = 0
        return out

    def move_right(self, x):
        if not self.periodic and x[-1].any():
            raise WindowOverflow("signal moved past the right window edge")
        return self.from_left(x)

    def move_left(self, x):
        if not self.periodic and x[0].any():
            raise WindowOverflow("signal moved past the left window edge")
        return self.from_right(x)


@dataclass
class _Dir:
    back: object
    ahead: object
    fwd_move: object
    bwd_move: object


def _directions(sh: Shifts):
    right = _Dir(sh.from_left, sh.from_right, sh.move_right, sh.move_left)
    left = _Dir(sh.from_right, sh.from_left, sh.move_left, sh.move_right)
    return right, left


@dataclass
class Planes:
    """Register planes of a batch of decoder configurations.

    ``defects`` is shared between directions (the symmetric rule keeps both
    directions' defect registers equal at all times).
    """

    defects: np.ndarray
    fws: list
    bws: list
    ans: list
    stacks: list

    @classmethod
    def zeros(cls, shape, ndir: int, dtype=np.uint64) -> "Planes":
        z = np.zeros(shape, dtype=dtype)
        return cls(
            defects=z.copy(),
            fws=[z.copy() for _ in range(ndir)],
            bws=[z.copy() for _ in range(ndir)],
            ans=[z.copy() for _ in range(ndir)],
            stacks=[BitCounter.zeros_like(z) for _ in range(ndir)],
        )

    @property
    def ndir(self) -> int:
        return len(self.fws)

    def copy(self) -> "Planes":
        return Planes(
            self.defects.copy(),
            [p.copy() for p in self.fws],
            [p.copy() for p in self.bws],
            [p.copy() for p in self.ans],
            [s.copy() for s in self.stacks],
        )

    def occupancy(self):
        """Plane of sites carrying any nonzero register."""
        occ = self.defects.copy()
        for k in range(self.ndir):
            occ |= self.fws[k] | self.bws[k] | self.ans[k] | self.stacks[k].nonzero()
        return occ

    def stack_limit_check(self, limit: int) -> None:
        for s in self.stacks:
            if (1 << len(s.planes)) - 1 <= limit:
                continue
            s.trim()
            if (1 << len(s.planes)) - 1 <= limit:
                continue
            top = int(s.values(_unpack_any).max())
            if top > limit:
                raise StackOverflow(f"stack height {top} exceeds limit {limit}")


def _unpack_any(p):
    if p.dtype == np.bool_:
        return p
    return unpack_words(p)


def unpack_words(p: np.ndarray) -> np.ndarray:
    """uint64 plane ``(..., W)`` -> 0/1 uint8 array ``(..., 64 W)`` in lane order."""
    b = np.ascontiguousarray(p).view(np.uint8)
    return np.unpackbits(b, axis=-1, bitorder="little")


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """0/1 array ``(..., B)`` -> uint64 plane ``(..., ceil(B / 64))``."""
    bits = np.asarray(bits, dtype=np.uint8)
    nb = bits.shape[-1]
    pad = (-nb) % 64
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), np.uint8)], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64)


# -- substeps ------------------------------------------------------------------


def _set_reflect(p: Planes, k: int, where) -> None:
    # (FwS, BwS) <- (0, 1) where (FwS, BwS) == (1, 0)
    r = where & p.fws[k] & ~p.bws[k]
    p.fws[k] = p.fws[k] ^ r
    p.bws[k] = p.bws[k] | r


def _send_forward(p: Planes, k: int, D, dr: _Dir) -> None:
    emit = D & ~dr.ahead(D) & ~p.fws[k]
    p.fws[k] = p.fws[k] | emit
    p.stacks[k].inc(emit)
    p.fws[k] = dr.fwd_move(p.fws[k])


def _backward(p: Planes, k: int, dr: _Dir, kb: int) -> None:
    S = p.stacks[k]
    B = p.bws[k]
    A = p.ans[k]
    for _ in range(kb):
        B = dr.bwd_move(B)
        x = B & A
        B = B ^ x
        A = A ^ x
        y = B & S.nonzero()
        B = B ^ y
        S.dec(y)
    p.bws[k] = B
    p.ans[k] = A


def _anti(p: Planes, k: int, D, dr: _Dir, ka: int) -> None:
    S = p.stacks[k]
    A = p.ans[k]
    e = ~D & ~A & S.nonzero()
    A = A | e
    S.dec(e)
    F, B = p.fws[k], p.bws[k]
    for _ in range(ka - 1):
        A = dr.fwd_move(A)
        x = A & F
        A = A ^ x
        F = F ^ x
        x = A & B
        A = A ^ x
        B = B ^ x
    A = dr.fwd_move(A)
    x = A & B
    A = A ^ x
    B = B ^ x
    p.ans[k], p.fws[k], p.bws[k] = A, F, B


def asr_step(p: Planes, sh: Shifts, ka: int = 3, kb: int = 3, measured=None):
    """One iteration of the asymmetric rule (signals travel right).

    Mutates ``p`` and returns the edge-indexed correction plane (bit ``c`` set
    means flip edge ``(c, c + 1)``).
    """
    dr, _ = _directions(sh)
    D = p.defects if measured is None else measured

    # matching of neighbouring defects: Cor.C for (Def.L, Def.C, Def.R) = (0, 1, 1)
    cor = ~dr.back(D) & D & dr.ahead(D)
    D = D & ~cor & ~dr.back(cor)

    _send_forward(p, 0, D, dr)

    # a forward signal sitting on a defect displaces it one site to the left
    hit = D & p.fws[0]
    D = D & ~hit
    _set_reflect(p, 0, hit)
    tmp_r = dr.ahead(hit)
    cor = cor | tmp_r
    D = D | tmp_r
    _set_reflect(p, 0, tmp_r)

    _backward(p, 0, dr, kb)
    _anti(p, 0, D, dr, ka)
    p.defects = D
    return cor


def ssr_step(p: Planes, sh: Shifts, ka: int = 3, kb: int = 3, measured=None):
    """One iteration of the symmetric rule: a right-pointing and a left-pointing
    asymmetric rule sharing defects and correction decisions."""
    right, left = _directions(sh)
    L, R = sh.from_left, sh.from_right
    D = p.defects if measured is None else measured

    # shared matching: edge (c, c+1) is corrected if either direction matches it
    DL, DR = L(D), R(D)
    req_right = ~DL & D & DR
    req_left = DL & D & ~DR
    cor = req_right | R(req_left)
    D = D ^ cor ^ L(cor)

    _send_forward(p, 0, D, right)
    _send_forward(p, 1, D, left)

    # shared displacement: a defect hit by exactly one direction moves away from it
    h1 = D & p.fws[0]
    h2 = D & p.fws[1]
    _set_reflect(p, 0, h1)
    _set_reflect(p, 1, h2)
    move_l = h1 & ~h2
    move_r = h2 & ~h1
    req_l = R(move_l)
    cor2 = req_l ^ move_r
    D = D ^ cor2 ^ L(cor2)
    _set_reflect(p, 0, cor2 & req_l)
    _set_reflect(p, 1, L(cor2 & move_r))

    _backward(p, 0, right, kb)
    _backward(p, 1, left, kb)
    _anti(p, 0, D, right, ka)
    _anti(p, 1, D, left, ka)
    p.defects = D
    return cor ^ cor2


def syndrome_plane(data, sh: Shifts):
    """Vertex parities of edge planes: vertex i compares edges i-1 and i."""
    return data ^ sh.from_left(data)
