"""Asymmetric (ASR) and symmetric (SSR) signal-rule decoders on value states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import engine
from .lattice import DecoderState, LatticeError, Window, logical_state  # noqa: F401  (re-export)


@dataclass(frozen=True)
class SignalRuleParams:
    k_a: int = 3
    k_b: int = 3
    symmetric: bool = False

    def __post_init__(self):
        if self.k_a < 3:
            raise ValueError(f"anti-signal speed k_a must be >= 3, got {self.k_a}")
        if self.k_b < 2:
            raise ValueError(f"backward-signal speed k_b must be >= 2, got {self.k_b}")

    @property
    def ndir(self) -> int:
        return 2 if self.symmetric else 1


class DirectionMismatch(LatticeError):
    """The two directions of a symmetric-rule state disagree on the defects."""


def to_planes(state: DecoderState) -> engine.Planes:
    if state.ndir == 2 and not np.array_equal(state.defects[0], state.defects[1]):
        raise DirectionMismatch("Def.1 and Def.2 differ")
    stacks = []
    for k in range(state.ndir):
        top = int(state.sta[k].max(initial=0))
        digits = max(1, top.bit_length())
        stacks.append(engine.BitCounter([((state.sta[k] >> b) & 1).astype(bool) for b in range(digits)]))
    return engine.Planes(
        defects=state.defects[0].astype(bool),
        fws=[state.fws[k].astype(bool) for k in range(state.ndir)],
        bws=[state.bws[k].astype(bool) for k in range(state.ndir)],
        ans=[state.ans[k].astype(bool) for k in range(state.ndir)],
        stacks=stacks,
    )


def _load(state: DecoderState, p: engine.Planes) -> None:
    for k in range(state.ndir):
        state.defects[k] = p.defects
        state.fws[k] = p.fws[k]
        state.bws[k] = p.bws[k]
        state.ans[k] = p.ans[k]
        state.sta[k] = p.stacks[k].values()


def _iterate(state: DecoderState, params: SignalRuleParams, measured_syndrome, step):
    if state.ndir != params.ndir:
        raise ValueError(f"state has {state.ndir} register sets, rule needs {params.ndir}")
    new = state.copy()
    p = to_planes(new)
    sh = engine.Shifts(new.topology.periodic)
    measured = None
    if measured_syndrome is not None:
        if isinstance(measured_syndrome, np.ndarray) and measured_syndrome.dtype == np.bool_:
            measured = measured_syndrome.copy()
        else:
            measured = np.zeros(new.n, dtype=bool)
            for v in measured_syndrome:
                measured[new.index(int(v))] ^= True
    cor = step(p, sh, params.k_a, params.k_b, measured)
    _load(new, p)
    new.t += 1
    new.check_stacks()
    mask = cor.astype(np.uint8)
    if new.data is not None:
        new.data ^= mask
    return new, mask


def asr_iteration(state: DecoderState, params: SignalRuleParams = SignalRuleParams(), measured_syndrome=None):
    """One synchronous ASR iteration.

    ``measured_syndrome`` (phenomenological mode) overwrites ``Def`` before the
    substeps; pass either vertex indices or a boolean per-site array. Returns the
    new state and the edge-indexed correction mask (bit ``c`` flips edge
    ``(c, c+1)``). The mask has already been applied to ``state.data`` if the
    state carries data.
    """
    if params.symmetric:
        raise ValueError("asr_iteration needs symmetric=False")
    return _iterate(state, params, measured_syndrome, engine.asr_step)


def ssr_iteration(state: DecoderState, params: SignalRuleParams = SignalRuleParams(symmetric=True), measured_syndrome=None):
    """One synchronous SSR iteration (see :func:`asr_iteration` for the arguments)."""
    if not params.symmetric:
        raise ValueError("ssr_iteration needs symmetric=True")
    new, mask = _iterate(state, params, measured_syndrome, engine.ssr_step)
    if not np.array_equal(new.defects[0], new.defects[1]):
        raise DirectionMismatch(f"Def.1 != Def.2 after iteration {new.t}")
    return new, mask


@dataclass
class Trace:
    """Snapshots of a code-capacity run.

    Arrays have shape ``(frames, ndir, size)``; ``times[f]`` is the iteration
    count of frame ``f``. ``corrections[f]`` is the mask applied during the
    iteration that produced frame ``f`` (zero for frame 0).
    """

    offset: int
    periodic: bool
    times: np.ndarray
    defects: np.ndarray
    fws: np.ndarray
    bws: np.ndarray
    ans: np.ndarray
    sta: np.ndarray
    corrections: np.ndarray
    data: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.defects.shape[-1]

    @property
    def ndir(self) -> int:
        return self.defects.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    def vertices(self) -> np.ndarray:
        return np.arange(self.size) + self.offset

    def state(self, f: int) -> DecoderState:
        from .lattice import Ring

        topo = Ring(self.size) if self.periodic else Window(self.offset, self.offset + self.size - 1)
        st = DecoderState.zeros(topo, self.ndir, with_data=self.data is not None)
        st.defects[:] = self.defects[f]
        st.fws[:] = self.fws[f]
        st.bws[:] = self.bws[f]
        st.ans[:] = self.ans[f]
        st.sta[:] = self.sta[f]
        if self.data is not None:
            st.data[:] = self.data[f]
        st.t = int(self.times[f])
        return st

    def defect_sets(self) -> list[list[int]]:
        return [(np.flatnonzero(d[0]) + self.offset).tolist() for d in self.defects]

    def supports(self) -> list[np.ndarray]:
        occ = (self.defects | self.fws | self.bws | self.ans).any(axis=1) | (self.sta > 0).any(axis=1)
        return [np.flatnonzero(o) + self.offset for o in occ]

    def to_npz(self, path) -> None:
        arrays = dict(
            offset=np.array(self.offset), periodic=np.array(self.periodic), times=self.times,
            defects=self.defects, fws=self.fws, bws=self.bws, ans=self.ans, sta=self.sta,
            corrections=self.corrections,
        )
        if self.data is not None:
            arrays["data"] = self.data
        np.savez_compressed(path, **arrays)

    @classmethod
    def from_npz(cls, path) -> "Trace":
        with np.load(path) as z:
            return cls(
                offset=int(z["offset"]), periodic=bool(z["periodic"]), times=z["times"],
                defects=z["defects"], fws=z["fws"], bws=z["bws"], ans=z["ans"], sta=z["sta"],
                corrections=z["corrections"], data=z["data"] if "data" in z.files else None,
            )


class _TraceBuilder:
    def __init__(self, state: DecoderState):
        self.state0 = state
        self.frames: list[tuple] = []

    def add(self, st: DecoderState, mask) -> None:
        self.frames.append((
            st.t, st.defects.copy(), st.fws.copy(), st.bws.copy(), st.ans.copy(),
            st.sta.astype(np.int32), mask.copy(), None if st.data is None else st.data.copy(),
        ))

    def build(self) -> Trace:
        cols = list(zip(*self.frames))
        st = self.state0
        return Trace(
            offset=st.topology.offset,
            periodic=st.topology.periodic,
            times=np.array(cols[0]),
            defects=np.stack(cols[1]).astype(np.uint8),
            fws=np.stack(cols[2]).astype(np.uint8),
            bws=np.stack(cols[3]).astype(np.uint8),
            ans=np.stack(cols[4]).astype(np.uint8),
            sta=np.stack(cols[5]),
            corrections=np.stack(cols[6]).astype(np.uint8),
            data=None if st.data is None else np.stack(cols[7]).astype(np.uint8),
        )


def run(initial: DecoderState, params: SignalRuleParams, t_max: int, stride: int = 1, stop_when_zero: bool = False) -> Trace:
    """Apply ``t_max`` noiseless iterations, keeping every ``stride``-th frame.

    With ``stop_when_zero`` the run ends at the first all-zero configuration
    (which is a fixed point).
    """
    step = ssr_iteration if params.symmetric else asr_iteration
    tb = _TraceBuilder(initial)
    st = initial.copy()
    zero = np.zeros(st.n, dtype=np.uint8)
    tb.add(st, zero)
    for _ in range(t_max):
        st, mask = step(st, params)
        last = (st.t - initial.t) == t_max
        if st.t % stride == 0 or last or (stop_when_zero and st.is_zero()):
            tb.add(st, mask)
        if stop_when_zero and st.is_zero():
            break
    return tb.build()


def asr_run(initial: DecoderState, params: SignalRuleParams = SignalRuleParams(), t_max: int = 100, stride: int = 1, stop_when_zero: bool = False) -> Trace:
    if params.symmetric:
        raise ValueError("asr_run needs symmetric=False")
    return run(initial, params, t_max, stride, stop_when_zero)


def ssr_run(initial: DecoderState, params: SignalRuleParams = SignalRuleParams(symmetric=True), t_max: int = 100, stride: int = 1, stop_when_zero: bool = False) -> Trace:
    if not params.symmetric:
        raise ValueError("ssr_run needs symmetric=True")
    return run(initial, params, t_max, stride, stop_when_zero)


def window_state(sigma: Iterable[int], ndir: int = 1) -> DecoderState:
    """Zero-register state with defects ``sigma`` in the default erasure window.

    With two signal directions the window is mirrored so that it extends
    ``80 * width`` sites on both sides.
    """
    win = Window.for_defects(sigma)
    if ndir == 2:
        win = Window(min(sigma) - (win.hi - min(sigma)), win.hi)
    return DecoderState.from_defects(sigma, win, ndir)
