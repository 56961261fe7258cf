"""Noise models and reproducible random streams.

Streams come from :class:`numpy.random.SeedSequence` keyed by
``(seed, experiment, block)`` and drive a Philox counter-based generator, so a
block of trajectories always sees the same draws no matter which worker runs
it or in which order blocks are scheduled.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .lattice import as_bits, syndrome_bits

# Above this probability a digit-by-digit comparison against random words beats gap sampling.
_DENSE_P = 0.08


@dataclass(frozen=True)
class PhenomenologicalParams:
    """Per-step data flip probability ``eps_d`` and measurement flip probability ``eps_m``."""

    eps_d: float
    eps_m: float

    def __post_init__(self):
        for name in ("eps_d", "eps_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def uniform(cls, eps: float) -> "PhenomenologicalParams":
        return cls(eps, eps)

    @property
    def is_noiseless(self) -> bool:
        return self.eps_d == 0.0 and self.eps_m == 0.0


def experiment_id(config: dict) -> int:
    """Stable 64-bit identifier of a configuration dictionary."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


@dataclass(frozen=True)
class RngStream:
    """Identity of an independent random stream.

    ``stream_id`` is an ``(experiment, index)`` pair; identical ``(seed, stream_id)``
    always produce identical draws.
    """

    seed: int
    stream_id: tuple[int, int] = (0, 0)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1), spawn_key=tuple(int(x) for x in self.stream_id))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, (self.stream_id[0], index))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_code_capacity(n: int, eps: float, rng) -> np.ndarray:
    """i.i.d. edge errors: each of the ``n`` bits is set with probability ``eps``."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return (_rng(rng).random(n) < eps).astype(np.uint8)


def noisy_syndrome(data, eps_m: float, rng) -> np.ndarray:
    """Exact ring syndrome of ``data`` with each bit flipped with probability ``eps_m``."""
    if not 0.0 <= eps_m <= 1.0:
        raise ValueError(f"eps_m must lie in [0, 1], got {eps_m}")
    s = syndrome_bits(as_bits(data))
    flips = (_rng(rng).random(s.size) < eps_m).astype(np.uint8)
    return s ^ flips


def bernoulli_words(rng: np.random.Generator, shape, p: float, lanes: int | None = None) -> np.ndarray:
    """Packed Bernoulli(p) plane of ``uint64`` words with the given ``shape``.

    Bit ``b`` of word ``[..., w]`` is lane ``64 * w + b``. If ``lanes`` is given,
    bits of lanes ``>= lanes`` in the last axis are forced to zero.
    """
    shape = tuple(shape)
    nwords = int(np.prod(shape))
    nbits = 64 * nwords
    if p <= 0.0:
        out = np.zeros(shape, dtype=np.uint64)
    elif p >= 1.0:
        out = np.full(shape, np.uint64(2**64 - 1))
    elif p >= _DENSE_P:
        out = _dyadic_words(rng, nwords, p).reshape(shape)
    else:
        out = np.zeros(nwords, dtype=np.uint64)
        expected = nbits * p
        chunk = int(expected + 6 * np.sqrt(expected) + 16)
        pos = -1
        found = []
        while True:
            gaps = rng.geometric(p, size=chunk)
            cs = pos + np.cumsum(gaps)
            found.append(cs[cs < nbits])
            if cs[-1] >= nbits:
                break
            pos = int(cs[-1])
        idx = np.concatenate(found)
        np.bitwise_or.at(out, idx >> 6, np.left_shift(np.uint64(1), (idx & 63).astype(np.uint64)))
        out = out.reshape(shape)
    if lanes is not None:
        out &= lane_mask(shape[-1], lanes)
    return out


def _dyadic_words(rng: np.random.Generator, nwords: int, p: float, digits: int = 32) -> np.ndarray:
    # Compare a uniform U (one random word per binary digit) against p truncated
    # to ``digits`` bits, least significant digit first: U < p on each lane.
    q = int(p * (1 << digits))
    acc = np.zeros(nwords, dtype=np.uint64)
    if q == 0:
        return acc
    low = (q & -q).bit_length() - 1
    for i in range(low, digits):
        r = rng.integers(0, 2**64, size=nwords, dtype=np.uint64, endpoint=False)
        if (q >> i) & 1:
            acc = ~r | acc
        else:
            acc &= ~r
    return acc


def lane_mask(words: int, lanes: int) -> np.ndarray:
    """``uint64`` vector of length ``words`` with the first ``lanes`` bits set."""
    bits = np.zeros(64 * words, dtype=bool)
    bits[:lanes] = True
    return np.packbits(bits, bitorder="little").view(np.uint64).copy()
