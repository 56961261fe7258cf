"""Site-by-site reference implementation of the asymmetric signal rule.

This is a deliberately naive transcription of the update rule, written with
explicit Python loops over sites and one list per register. Every substep
reads a frozen copy of the registers it needs from neighbours, so the result
is a synchronous update. It is slow and exists only to cross-check the
bit-plane kernels in :mod:`cadecoders.engine`.
"""
from __future__ import annotations

from .lattice import DecoderState, WindowOverflow


class _Sites:
    def __init__(self, size: int, periodic: bool):
        self.size = size
        self.periodic = periodic

    def left(self, arr, i):
        if i == 0:
            return arr[-1] if self.periodic else 0
        return arr[i - 1]

    def right(self, arr, i):
        if i == self.size - 1:
            return arr[0] if self.periodic else 0
        return arr[i + 1]

    def check_exit(self, arr, edge):
        if not self.periodic and arr[edge]:
            raise WindowOverflow("signal left the window")


def reference_asr_iteration(state: DecoderState, ka: int = 3, kb: int = 3, measured=None):
    """Return ``(new_state, correction_list)`` for one ASR iteration.

    ``measured`` is an optional 0/1 list that replaces the defect register.
    """
    n = state.n
    S = _Sites(n, state.topology.periodic)
    Def = [int(x) for x in (measured if measured is not None else state.defects[0])]
    FwS = [int(x) for x in state.fws[0]]
    BwS = [int(x) for x in state.bws[0]]
    AnS = [int(x) for x in state.ans[0]]
    Sta = [int(x) for x in state.sta[0]]
    Cor = [0] * n
    Tmp = [0] * n

    # matching of neighbouring defects
    d0 = Def[:]
    for c in range(n):
        if (S.left(d0, c), d0[c], S.right(d0, c)) == (0, 1, 1):
            Cor[c] = 1
            Def[c] = 0
    cor0 = Cor[:]
    for c in range(n):
        if S.left(cor0, c) == 1:
            Def[c] = 0

    # send forward-signals
    d0 = Def[:]
    for c in range(n):
        if d0[c] == 1 and S.right(d0, c) == 0 and FwS[c] == 0:
            FwS[c] = 1
            Sta[c] += 1

    # propagate forward-signals to the right
    S.check_exit(FwS, n - 1)
    Tmp = FwS[:]
    FwS = [S.left(Tmp, c) for c in range(n)]
    Tmp = [0] * n

    # correction and reflection
    for c in range(n):
        if Def[c] == 1 and FwS[c] == 1:
            Tmp[c] = 1
            Def[c] = 0
            if (FwS[c], BwS[c]) == (1, 0):
                FwS[c], BwS[c] = 0, 1
    for c in range(n):
        if S.right(Tmp, c) == 1:
            Cor[c] = 1
            Def[c] = 1
            if (FwS[c], BwS[c]) == (1, 0):
                FwS[c], BwS[c] = 0, 1

    # backward-signals
    for _ in range(kb):
        S.check_exit(BwS, 0)
        Tmp = BwS[:]
        BwS = [S.right(Tmp, c) for c in range(n)]
        for c in range(n):
            if BwS[c] == 1 and AnS[c] == 1:
                BwS[c] = AnS[c] = 0
            if BwS[c] == 1 and Sta[c] > 0:
                BwS[c] = 0
                Sta[c] -= 1

    # anti-signals
    for c in range(n):
        if Def[c] == 0 and AnS[c] == 0 and Sta[c] > 0:
            AnS[c] = 1
            Sta[c] -= 1
    for _ in range(ka - 1):
        S.check_exit(AnS, n - 1)
        Tmp = AnS[:]
        AnS = [S.left(Tmp, c) for c in range(n)]
        for c in range(n):
            if AnS[c] == 1 and FwS[c] == 1:
                AnS[c] = FwS[c] = 0
            if AnS[c] == 1 and BwS[c] == 1:
                AnS[c] = BwS[c] = 0
    S.check_exit(AnS, n - 1)
    Tmp = AnS[:]
    AnS = [S.left(Tmp, c) for c in range(n)]
    for c in range(n):
        if AnS[c] == 1 and BwS[c] == 1:
            AnS[c] = BwS[c] = 0

    new = state.copy()
    new.defects[0] = Def
    new.fws[0] = FwS
    new.bws[0] = BwS
    new.ans[0] = AnS
    new.sta[0] = Sta
    new.t += 1
    if new.data is not None:
        for c in range(n):
            new.data[c] ^= Cor[c]
    return new, Cor
