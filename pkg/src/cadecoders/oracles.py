"""Independent checkers for the signal rules.

* runtime checks of the charge bookkeeping (total charge, prefix deficit,
  zero charge left of every defect) and of the interaction frontier;
* erasure certificates for finite defect sets on the line, singly or as a
  batched campaign;
* the hierarchical chunk decomposition of an error set and the closed-form
  code-capacity bound;
* exact logical failure probabilities by exhaustive enumeration at small ``n``.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import engine
from .lattice import Window, WindowOverflow
from .signal_rules import SignalRuleParams, Trace, asr_run, window_state


@dataclass
class Violation:
    check: str
    step: int
    site: int | None
    expected: str
    observed: str
    case: int | None = None

    def as_dict(self) -> dict:
        return dict(check=self.check, step=self.step, site=self.site, expected=self.expected,
                    observed=self.observed, case=self.case)


@dataclass
class CheckReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, v: Violation, limit: int = 100) -> None:
        if len(self.violations) < limit:
            self.violations.append(v)


# -- charge facts --------------------------------------------------------------------


def trace_charges(trace: Trace, direction: int = 0) -> np.ndarray:
    """Per-frame, per-site charge ``fws + bws - ans - sta`` -> ``(frames, size)``."""
    d = direction
    return (trace.fws[:, d].astype(np.int64) + trace.bws[:, d] - trace.ans[:, d] - trace.sta[:, d])


def check_charge_facts(trace: Trace, direction: int = 0) -> CheckReport:
    """Check on every frame: total charge 0, every prefix charge <= 0, prefix charge 0 at every defect.

    Prefixes run from the left window edge. Only the first violation of each
    kind is recorded.
    """
    rep = CheckReport("charge")
    q = trace_charges(trace, direction)
    pre = np.cumsum(q, axis=1) - q  # charge strictly left of each site
    seen = set()
    for f in range(len(trace)):
        rep.checked += 1
        t = int(trace.times[f])
        tot = int(q[f].sum())
        if tot != 0 and "total" not in seen:
            seen.add("total")
            rep.add(Violation("total", t, None, "0", str(tot)))
        bad = np.flatnonzero(np.cumsum(q[f]) > 0)
        if bad.size and "prefix" not in seen:
            seen.add("prefix")
            j = int(bad[0])
            rep.add(Violation("prefix", t, j + 1 + trace.offset, "<= 0", str(int(np.cumsum(q[f])[j]))))
        dj = np.flatnonzero(trace.defects[f, direction])
        nz = dj[pre[f, dj] != 0]
        if nz.size and "defect" not in seen:
            seen.add("defect")
            j = int(nz[0])
            rep.add(Violation("defect", t, j + trace.offset, "0", str(int(pre[f, j]))))
    return rep


# -- interaction frontier ----------------------------------------------------------------


@dataclass
class FrontierTrace:
    phi: list
    terminated_at: int | None
    times: list

    def is_monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.phi, self.phi[1:]))


def _sets(trace: Trace, f: int):
    d = set((np.flatnonzero(trace.defects[f, 0]) + trace.offset).tolist())
    fw = set((np.flatnonzero(trace.fws[f, 0]) + trace.offset).tolist())
    return d, fw


def track_frontier(trace: Trace) -> FrontierTrace:
    """Follow the interaction frontier through an ASR trace with every frame recorded.

    Starts at the leftmost defect. At each step the frontier advances by one if
    the next site holds a defect or forward-signal in the new frame, holds if an
    odd number of defects lie at or left of it, and otherwise jumps to the next
    defect or forward-signal to its right. Stops once no defect lies right of it.
    """
    times = np.asarray(trace.times)
    if len(times) < 2 or np.any(np.diff(times) != 1):
        raise ValueError("frontier tracking needs a trace with every step recorded")
    d0, _ = _sets(trace, 0)
    if not d0:
        return FrontierTrace([], 0, [])
    phi = [min(d0)]
    out_t = [int(times[0])]
    t_r = None
    for f in range(len(times) - 1):
        cur = phi[-1]
        d_now, _ = _sets(trace, f)
        d_next, fw_next = _sets(trace, f + 1)
        if not any(x > cur for x in d_next):
            t_r = int(times[f])
            break
        occ_next = d_next | fw_next
        A = (cur + 1) in occ_next
        B = sum(1 for x in d_now if x <= cur) % 2 == 1
        if A:
            nxt = cur + 1
        elif B:
            nxt = cur
        else:
            nxt = min(x for x in occ_next if x > cur)
        phi.append(nxt)
        out_t.append(int(times[f + 1]))
    return FrontierTrace(phi, t_r, out_t)


def check_frontier_lemmas(trace: Trace, ft: FrontierTrace | None = None) -> CheckReport:
    """Monotonicity, the 1/11 average-speed bound between defect hits, and the region conditions left of the frontier."""
    rep = CheckReport("frontier")
    ft = ft or track_frontier(trace)
    if not ft.is_monotone():
        k = next(i for i in range(1, len(ft.phi)) if ft.phi[i] < ft.phi[i - 1])
        rep.add(Violation("monotone", ft.times[k], ft.phi[k], f">= {ft.phi[k - 1]}", str(ft.phi[k])))
    hits = []
    for i, t in enumerate(ft.times):
        d, _ = _sets(trace, t - int(trace.times[0]))
        if ft.phi[i] in d:
            hits.append((t, ft.phi[i]))
    for (t1, p1), (t2, p2) in zip(hits, hits[1:]):
        rep.checked += 1
        if 11 * (p2 - p1) < (t2 - t1):
            rep.add(Violation("speed", t2, p2, f">= {(t2 - t1) / 11:.3f}", str(p2 - p1)))
    for i, t in enumerate(ft.times):
        f = t - int(trace.times[0])
        phi = ft.phi[i]
        rep.checked += 1
        _region_checks(trace, f, phi, rep)
    return rep


def _region_checks(trace: Trace, f: int, phi: int, rep: CheckReport) -> None:
    off = trace.offset
    defs = (np.flatnonzero(trace.defects[f, 0]) + off).tolist()
    fw = trace.fws[f, 0].astype(bool)
    neg = (trace.ans[f, 0] > 0) | (trace.sta[f, 0] > 0)
    t = int(trace.times[f])
    for i in range(len(defs) - 1):
        a, b = defs[i], defs[i + 1]
        odd_left = i % 2 == 0  # 1-based index i+1 is odd
        for x in range(a + 1, b):
            j = x - off
            if odd_left and x <= phi:
                if not fw[j]:
                    rep.add(Violation("odd-even filled", t, x, "forward-signal", "none"))
                if neg[j]:
                    rep.add(Violation("odd-even neutral", t, x, "no negative charge", "negative charge"))
            if not odd_left and x < phi and fw[j]:
                rep.add(Violation("even-odd empty", t, x, "no forward-signal", "forward-signal"))
        if not odd_left and b <= phi and b - a < 2:
            rep.add(Violation("even-odd gap", t, b, ">= 2", str(b - a)))


def check_recombination_lemma(trace: Trace) -> CheckReport:
    """After the last defect disappears, the support stays in ``[z, z + 6 delta]`` and empties within ``5 delta``."""
    rep = CheckReport("recombination")
    sets = trace.defect_sets()
    sup = trace.supports()
    start = next((f for f, s in enumerate(sets) if not s), None)
    if start is None or not len(sup[start]):
        return rep
    z = int(sup[start].min())
    delta = int(sup[start].max()) - z
    t_r = int(trace.times[start])
    for f in range(start, len(trace)):
        rep.checked += 1
        t = int(trace.times[f])
        s = sup[f]
        if len(s) and (s.min() < z or s.max() > z + 6 * delta):
            rep.add(Violation("support", t, int(s.max()), f"within [{z}, {z + 6 * delta}]", f"[{s.min()}, {s.max()}]"))
        if t >= t_r + 5 * delta and len(s):
            rep.add(Violation("empty", t, int(s.min()), "empty", f"{len(s)} sites"))
            break
    return rep


# -- erasure certificates -----------------------------------------------------------------


@dataclass
class ErasureCertificate:
    passed: bool
    t_zero: int | None
    max_support_right: int
    sigma_confined: bool
    support_bounded: bool
    width: int


def erasure_certificate(sigma: Iterable[int], params: SignalRuleParams = SignalRuleParams()) -> ErasureCertificate:
    """Run the ASR on a finite defect set in window mode and test the linear-erasure bounds.

    Passes iff the defects stay in ``[s1, s1 + D]``, the support stays in
    ``[s1, s1 + 78 D]`` and the configuration is empty by ``t = 77 D``, where
    ``D`` is the width of ``sigma``.
    """
    s = sorted(set(sigma))
    if not s or len(s) % 2:
        raise ValueError("a defect set on the line needs a positive even number of defects")
    width = s[-1] - s[0]
    s1 = s[0]
    try:
        tr = asr_run(window_state(s), params, t_max=77 * width + 1, stop_when_zero=True)
    except WindowOverflow:
        return ErasureCertificate(False, None, 10**9, False, False, width)
    conf = all(not d or (min(d) >= s1 and max(d) <= s1 + width) for d in tr.defect_sets())
    sups = tr.supports()
    right = max((int(x.max()) - s1 for x in sups if len(x)), default=0)
    left_ok = all(not len(x) or x.min() >= s1 for x in sups)
    bounded = left_ok and right <= 78 * width
    t_zero = next((int(tr.times[f]) for f, x in enumerate(sups) if not len(x)), None)
    ok = conf and bounded and t_zero is not None and t_zero <= 77 * width
    return ErasureCertificate(ok, t_zero, right, conf, bounded, width)


def random_defect_sets(count: int, max_pairs: int = 4, max_width: int = 50, seed: int = 0) -> list[list[int]]:
    """Random finite defect sets: ``m`` uniform in ``1..max_pairs``, width uniform in ``1..max_width``, left end at 0."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        m = int(rng.integers(1, max_pairs + 1))
        width = int(rng.integers(1, max_width + 1))
        if 2 * m > width + 1:
            continue
        inner = rng.choice(np.arange(1, width), size=2 * m - 2, replace=False) if 2 * m > 2 else []
        out.append(sorted([0, width, *map(int, inner)]))
    return out


@dataclass
class CampaignCase:
    sigma: list
    t_zero: int | None = None
    sigma_confined: bool = True
    support_bounded: bool = True
    max_support_right: int = 0
    charge_ok: bool = True

    @property
    def erasure_pass(self) -> bool:
        width = self.sigma[-1] - self.sigma[0]
        return self.sigma_confined and self.support_bounded and self.t_zero is not None and self.t_zero <= 77 * width


@dataclass
class CampaignReport:
    cases: list
    erasure: CheckReport
    charge: CheckReport
    seconds: float

    @property
    def n_pass(self) -> int:
        return sum(c.erasure_pass for c in self.cases)


def erasure_campaign(sigmas: Sequence[Sequence[int]], params: SignalRuleParams = SignalRuleParams(),
                     check_charges: bool = True) -> CampaignReport:
    """Batched erasure certificates (and charge checks) for many defect sets.

    Sets are grouped by width and each group runs as one batch of boolean
    planes on the window ``[s1 - 2, s1 + 80 D]``. Only the stretch of the window
    that can hold excitations is simulated: the active slice grows whenever
    something comes within a few sites of its right end.
    """
    t0 = time.perf_counter()
    cases = [CampaignCase(sorted(set(s))) for s in sigmas]
    er = CheckReport("erasure")
    ch = CheckReport("charge")
    groups: dict[int, list[int]] = {}
    for i, c in enumerate(cases):
        if len(c.sigma) % 2 or not c.sigma:
            raise ValueError(f"case {i}: defect set must have a positive even size")
        groups.setdefault(c.sigma[-1] - c.sigma[0], []).append(i)
    for width in sorted(groups):
        _run_group(width, groups[width], cases, params, er, ch, check_charges)
    for i, c in enumerate(cases):
        er.checked += 1
        if not c.erasure_pass:
            er.add(Violation("erasure", c.t_zero or -1, None, "pass", f"confined={c.sigma_confined} bounded={c.support_bounded} t_zero={c.t_zero}", i))
    return CampaignReport(cases, er, ch, time.perf_counter() - t0)


def _run_group(width, idx, cases, params, er, ch, check_charges):
    B = len(idx)
    full = 80 * width + 3  # window [-2, 80 width] relative to s1
    margin = params.k_a + params.k_b + 3
    size = min(full, width + 4 + 4 * margin)
    D = np.zeros((size, B), dtype=bool)
    for b, i in enumerate(idx):
        s1 = cases[i].sigma[0]
        for s in cases[i].sigma:
            D[s - s1 + 2, b] = True
    p = engine.Planes.zeros((size, B), 1, dtype=bool)
    p.defects = D
    sh = engine.Shifts(periodic=False)
    t_zero = np.full(B, -1)
    confined = np.ones(B, dtype=bool)
    bounded = np.ones(B, dtype=bool)
    right = np.full(B, width, dtype=np.int64)
    charge_ok = np.ones(B, dtype=bool)
    hi_def = width + 2
    hi_sup = 78 * width + 2
    t_end = 77 * width + 1
    for t in range(1, t_end + 1):
        try:
            engine.asr_step(p, sh, params.k_a, params.k_b)
        except WindowOverflow:
            if size >= full:
                bounded[:] = False
                break
            raise
        occ = p.occupancy()
        if occ[size - margin:].any() and size < full:
            grow = min(full, size + max(64, size // 2)) - size
            p = _pad_planes(p, grow)
            size += grow
            occ = p.occupancy()
        alive = occ.any(axis=0)
        newly = alive.__invert__() & (t_zero < 0)
        t_zero[newly] = t
        rows = np.flatnonzero(occ.any(axis=1))
        if rows.size:
            live_rows = occ[: rows[-1] + 1]
            last = live_rows.shape[0] - 1 - np.argmax(live_rows[::-1], axis=0)
            right = np.maximum(right, np.where(alive, last - 2, 0))
            if rows[0] < 2:
                bounded &= ~occ[:2].any(axis=0)
            if rows[-1] > hi_sup:
                bounded &= ~occ[hi_sup + 1:].any(axis=0)
            d = p.defects
            confined &= ~d[:2].any(axis=0) & ~d[hi_def + 1:].any(axis=0)
        if check_charges:
            q = (p.fws[0].astype(np.int16) + p.bws[0] - p.ans[0]) - p.stacks[0].values().astype(np.int16)
            cs = np.cumsum(q, axis=0)
            total_bad = cs[-1] != 0
            prefix_bad = (cs > 0).any(axis=0)
            excl = cs - q
            defect_bad = (p.defects & (excl != 0)).any(axis=0)
            bad = total_bad | prefix_bad | defect_bad
            if bad.any():
                for b in np.flatnonzero(bad & charge_ok):
                    kind = "total" if total_bad[b] else "prefix" if prefix_bad[b] else "defect"
                    ch.add(Violation(kind, t, None, "0" if kind != "prefix" else "<= 0", "violated", idx[b]))
                charge_ok &= ~bad
            ch.checked += B
        if (t_zero >= 0).all():
            break
    for b, i in enumerate(idx):
        c = cases[i]
        c.t_zero = int(t_zero[b]) if t_zero[b] >= 0 else None
        c.sigma_confined = bool(confined[b])
        c.support_bounded = bool(bounded[b])
        c.max_support_right = int(right[b])
        c.charge_ok = bool(charge_ok[b])


def _pad_planes(p: engine.Planes, extra: int) -> engine.Planes:
    def pad(x):
        return np.concatenate([x, np.zeros((extra,) + x.shape[1:], dtype=x.dtype)], axis=0)

    return engine.Planes(
        pad(p.defects),
        [pad(x) for x in p.fws],
        [pad(x) for x in p.bws],
        [pad(x) for x in p.ans],
        [engine.BitCounter([pad(x) for x in s.planes]) for s in p.stacks],
    )


def single_cluster_timing(width: int, params: SignalRuleParams = SignalRuleParams()) -> tuple[int | None, int | None]:
    """``(arrival, recombination)`` for the pair ``{0, width}``.

    ``arrival`` is the first iteration in which a forward-signal reaches the
    right defect's site (visible as a displacement of that defect, or as a
    match when ``width == 1``); ``recombination`` is the first iteration after
    which no defect is left.
    """
    tr = asr_run(window_state([0, width]), params, t_max=3 * width + 10, stop_when_zero=True)
    sets = tr.defect_sets()
    arrival = next((int(tr.times[f]) for f in range(1, len(tr)) if width not in sets[f]), None)
    rec = next((int(tr.times[f]) for f in range(len(tr)) if not sets[f]), None)
    return arrival, rec


# -- chunk decomposition -----------------------------------------------------------------


class ChunkGuardError(RuntimeError):
    """Too many chunks to enumerate exactly."""


@dataclass
class ChunkDecomposition:
    L: int
    levels: list  # E_0 ⊇ E_1 ⊇ ... (sorted lists of edge positions)
    F: list  # F_k = E_k \ E_{k+1}
    components: list  # per level k, list of connected components of F_k
    n: int | None = None
    violations: list = field(default_factory=list)  # (level, component, check, value, bound)

    @property
    def m(self) -> int:
        """Index of the last non-empty level."""
        return max((k for k, e in enumerate(self.levels) if e), default=0)


def _dist(a: int, b: int, n: int | None) -> int:
    d = abs(a - b)
    return min(d, n - d) if n else d


def _diam(s, n: int | None) -> int:
    s = sorted(s)
    if len(s) < 2:
        return 0
    if n is None:
        return s[-1] - s[0]
    return max(_dist(a, b, n) for a, b in itertools.combinations(s, 2))


def _components(points: list, ell: float, n: int | None) -> list:
    if not points:
        return []
    pts = sorted(points)
    comps = [[pts[0]]]
    for x in pts[1:]:
        if x - comps[-1][-1] <= ell:
            comps[-1].append(x)
        else:
            comps.append([x])
    if n is not None and len(comps) > 1 and (pts[0] + n - pts[-1]) <= ell:
        comps[0] = comps.pop() + comps[0]
    return comps


def _set_distance(a, b, n: int | None) -> float:
    if not a or not b:
        return math.inf
    return min(_dist(x, y, n) for x in a for y in b)


def chunk_decomposition(errors, L: int = 6, n: int | None = None, max_chunks: int = 200_000,
                        strict: bool = False) -> ChunkDecomposition:
    """Hierarchical chunk decomposition of an error set.

    ``errors`` is either a 0/1 edge vector (ring of that length) or an iterable
    of edge positions on the line (pass ``n`` for a ring). Level-0 chunks are
    single errors; a level-``k`` chunk is the union of two disjoint
    level-``(k-1)`` chunks with diameter at most ``L**k / 2``. All chunks are
    enumerated, so ``E_k`` is exactly the union of every level-``k`` chunk.
    The connected components of each ``F_k`` (single linkage at distance
    ``L**k``) are checked against the diameter bound ``L**k`` and the
    separation bound ``d(D, E_k \\ D) > L**(k+1) / 3``. Failures are listed in
    ``violations``; with ``strict`` the first one raises ``AssertionError``.
    The separation bound can fail when an error of ``F_k`` sits next to an
    error that was absorbed into a higher level, e.g. edges ``50, 51, 52``
    (plus ``33, 34``) at ``L = 6``.
    """
    if L < 6:
        raise ValueError("the decomposition needs L >= 6")
    arr = np.asarray(errors)
    if arr.ndim == 1 and arr.size and set(np.unique(arr).tolist()) <= {0, 1} and n is None and not isinstance(errors, (list, tuple, set, frozenset)):
        n = arr.size
        pts = np.flatnonzero(arr).tolist()
    else:
        pts = sorted(set(int(x) for x in errors))
    chunks = [frozenset([p]) for p in pts]
    levels = [sorted(pts)]
    k = 0
    while chunks:
        k += 1
        lim = L**k / 2
        nxt = set()
        for a, b in itertools.combinations(chunks, 2):
            if a & b:
                continue
            u = a | b
            if _diam(u, n) <= lim:
                nxt.add(u)
                if len(nxt) > max_chunks:
                    raise ChunkGuardError(f"more than {max_chunks} level-{k} chunks")
        chunks = list(nxt)
        levels.append(sorted(set().union(*chunks)) if chunks else [])
    while len(levels) > 1 and not levels[-1]:
        levels.pop()
    levels.append([])
    F = [sorted(set(levels[i]) - set(levels[i + 1])) for i in range(len(levels) - 1)]
    levels = levels[:-1]
    comps = [_components(F[i], L**i, n) for i in range(len(F))]
    dec = ChunkDecomposition(L, levels, F, comps, n)
    for i, cs in enumerate(comps):
        rest_all = set(levels[i])
        for c in cs:
            dm = _diam(c, n)
            if dm > L**i:
                dec.violations.append((i, c, "diameter", dm, L**i))
            d = _set_distance(c, sorted(rest_all - set(c)), n)
            if not d > L ** (i + 1) / 3:
                dec.violations.append((i, c, "separation", d, L ** (i + 1) / 3))
    if strict and dec.violations:
        i, c, kind, val, bound = dec.violations[0]
        raise AssertionError(f"level {i}: component {c} {kind} {val} violates bound {bound}")
    return dec


# -- threshold bound -----------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdBound:
    bound: float
    M: int
    L: int
    eps_th: float
    alpha_star: float
    vacuous: bool = False


def threshold_bound(n: int, eps: float, L: int = 232) -> ThresholdBound:
    """Code-capacity bound ``eps_L <= n L^-(M+1) (L eps)^(2^M)`` with ``M = floor(log n / log L)``.

    ``eps_th = 1/L`` and ``alpha* = log 2 / log L`` are reported alongside.
    The bound is vacuous (flagged, value capped at 1) when ``eps >= 1/L``.
    """
    if L < 232:
        raise ValueError("the hierarchical argument needs L >= 232")
    if n < 1:
        raise ValueError("n must be positive")
    M = 0
    while L ** (M + 1) <= n:
        M += 1
    eps_th = 1.0 / L
    alpha = math.log(2) / math.log(L)
    if eps >= eps_th:
        return ThresholdBound(1.0, M, L, eps_th, alpha, vacuous=True)
    log_b = math.log(n) - (M + 1) * math.log(L) + (2**M) * math.log(L * eps) if eps > 0 else -math.inf
    return ThresholdBound(min(1.0, math.exp(log_b)), M, L, eps_th, alpha)


# -- exact small-n enumeration ----------------------------------------------------------------


MAX_ENUM_BITS = 22


def _ring_fail_mask(errors: np.ndarray, symmetric: bool, tau: int, ka: int, kb: int) -> np.ndarray:
    """Boolean planes ``(n, B)`` of initial errors -> per-column failure after at most ``tau`` iterations."""
    sh = engine.Shifts(periodic=True)
    p = engine.Planes.zeros(errors.shape, 2 if symmetric else 1, dtype=bool)
    p.defects = engine.syndrome_plane(errors, sh)
    data = errors.copy()
    step = engine.ssr_step if symmetric else engine.asr_step
    for _ in range(tau):
        if not p.occupancy().any():
            break
        data ^= step(p, sh, ka, kb)
    n = errors.shape[0]
    return (2 * data.sum(axis=0) > n) | p.occupancy().any(axis=0)


def _all_patterns(nbits: int) -> np.ndarray:
    codes = np.arange(1 << nbits, dtype=np.int64)
    return ((codes[None, :] >> np.arange(nbits)[:, None]) & 1).astype(bool)


@dataclass
class ExactResult:
    probability: float
    fail_by_weight: np.ndarray  # number of failing patterns of each weight (code capacity)
    patterns: int


def exact_logical_probability(rule: str, n: int, eps=None, tau: int | None = None, *,
                              eps_d: float | None = None, eps_m: float | None = None,
                              k_a: int = 3, k_b: int = 3) -> ExactResult:
    """Exact logical failure probability by exhaustive enumeration.

    Code-capacity mode (``eps`` given): every one of the ``2**n`` error
    patterns is decoded for ``tau`` iterations (default ``77 n``); a pattern
    fails if the majority is flipped or registers remain. Phenomenological mode
    (``eps_d``/``eps_m`` given): every realisation of data and measurement flips
    over ``tau`` steps is simulated from the zero state and the result is the
    probability that the majority reads 1 at ``tau``.
    """
    if rule not in ("asr", "ssr"):
        raise ValueError("exact enumeration supports the signal rules only")
    symmetric = rule == "ssr"
    if eps is not None:
        if n > MAX_ENUM_BITS:
            raise ValueError(f"n = {n} exceeds the enumeration guard ({MAX_ENUM_BITS} bits)")
        tau = 77 * n if tau is None else tau
        pats = _all_patterns(n)
        fail = _ring_fail_mask(pats, symmetric, tau, k_a, k_b)
        w = pats.sum(axis=0)
        by_w = np.bincount(w[fail], minlength=n + 1)
        probs = np.array([eps**k * (1 - eps) ** (n - k) for k in range(n + 1)])
        return ExactResult(float((by_w * probs).sum()), by_w, pats.shape[1])
    if eps_d is None or eps_m is None or tau is None:
        raise ValueError("phenomenological enumeration needs eps_d, eps_m and tau")
    nbits = 2 * n * tau
    if nbits > MAX_ENUM_BITS:
        raise ValueError(f"2 n tau = {nbits} exceeds the enumeration guard ({MAX_ENUM_BITS} bits)")
    pats = _all_patterns(nbits)
    sh = engine.Shifts(periodic=True)
    p = engine.Planes.zeros((n, pats.shape[1]), 2 if symmetric else 1, dtype=bool)
    data = np.zeros((n, pats.shape[1]), dtype=bool)
    step = engine.ssr_step if symmetric else engine.asr_step
    logw = np.zeros(pats.shape[1])
    for t in range(tau):
        dflip = pats[(2 * t) * n:(2 * t + 1) * n]
        mflip = pats[(2 * t + 1) * n:(2 * t + 2) * n]
        data ^= dflip
        meas = engine.syndrome_plane(data, sh) ^ mflip
        data ^= step(p, sh, k_a, k_b, meas)
        logw += _logweights(dflip, eps_d) + _logweights(mflip, eps_m)
    one = 2 * data.sum(axis=0) > n
    return ExactResult(float(np.exp(logw)[one].sum()), np.zeros(0, dtype=np.int64), pats.shape[1])


def _logweights(flips: np.ndarray, p: float) -> np.ndarray:
    k = flips.sum(axis=0)
    m = flips.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = math.log(p) if p > 0 else -math.inf
        lq = math.log1p(-p) if p < 1 else -math.inf
        return np.where(k > 0, k * lp, 0.0) + np.where(m - k > 0, (m - k) * lq, 0.0)


def minimal_failing_errors(n: int, rule: str = "asr", tau: int | None = None, max_weight: int | None = None,
                           k_a: int = 3, k_b: int = 3) -> tuple[int | None, list]:
    """Smallest weight of a ring error the rule fails on, with all failing patterns of that weight."""
    symmetric = rule == "ssr"
    tau = 77 * n if tau is None else tau
    max_weight = n if max_weight is None else max_weight
    for w in range(1, max_weight + 1):
        combos = list(itertools.combinations(range(n), w))
        for start in range(0, len(combos), 1 << 14):
            chunk = combos[start:start + (1 << 14)]
            pats = np.zeros((n, len(chunk)), dtype=bool)
            for j, c in enumerate(chunk):
                pats[list(c), j] = True
            fail = _ring_fail_mask(pats, symmetric, tau, k_a, k_b)
            if fail.any():
                found = [list(chunk[j]) for j in np.flatnonzero(fail)]
                rest = combos[start + len(chunk):]
                if rest:
                    pats = np.zeros((n, len(rest)), dtype=bool)
                    for j, c in enumerate(rest):
                        pats[list(c), j] = True
                    f2 = _ring_fail_mask(pats, symmetric, tau, k_a, k_b)
                    found += [list(rest[j]) for j in np.flatnonzero(f2)]
                return w, found
    return None, []
