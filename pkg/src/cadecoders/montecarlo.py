"""Monte-Carlo trajectories, logical-error-rate estimation and stack statistics.

Trajectories are simulated in *blocks*: ``64 * words`` independent runs packed
into the bit lanes of ``uint64`` planes. A block draws all its randomness from
its own counter-based stream, keyed by ``(seed, experiment id, block index)``,
so results do not depend on how blocks are distributed across worker
processes. Adaptive campaigns consume blocks in index order and stop at the
first block where the flip budget is met, which keeps them deterministic too.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import ca_rules, engine
from .lattice import StackOverflow
from .noise import PhenomenologicalParams, RngStream, bernoulli_words, experiment_id
from .signal_rules import SignalRuleParams

RULES = ("asr", "ssr", "shearing", "toom")
DEFAULT_TAU = 1000
Z95 = stats.norm.ppf(0.975)
# one-sided 97.5% Poisson bound for zero observed events (ln 40)
ZERO_EVENT_UPPER = math.log(40.0)
# standard errors by which P_L must stay below 1/2 to enter the rate fit
SATURATION_Z = 5.0


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class RuleConfig:
    """Which decoder to run and its knobs."""

    rule: str = "ssr"
    k_a: int = 3
    k_b: int = 3
    periodic: bool = True  # shearing rule
    diagonal: int = 1  # shearing rule
    c: float = 2.0  # Toom orientation schedule constant
    boundary: str = "agree"  # Toom boundary policy

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.rule in ("asr", "ssr"):
            SignalRuleParams(self.k_a, self.k_b, self.rule == "ssr")

    @property
    def signal_params(self) -> SignalRuleParams:
        return SignalRuleParams(self.k_a, self.k_b, self.rule == "ssr")


def sample_times(tau: int, dense_until: int = 256, points: int = 96) -> np.ndarray:
    """Times at which ``P_L`` is recorded: every step up to ``dense_until``, then log-spaced, always ending at ``tau``."""
    dense = np.arange(1, min(tau, dense_until) + 1)
    if tau <= dense_until:
        return dense
    tail = np.unique(np.geomspace(dense_until, tau, points).round().astype(np.int64))
    return np.unique(np.concatenate([dense, tail, [tau]]))


# -- packed simulators ---------------------------------------------------------------


def _popcount_lanes(plane: np.ndarray) -> np.ndarray:
    """Per-lane count of set bits over the site axes of a packed plane -> ``(64 W,)``."""
    bits = engine.unpack_words(plane.reshape(-1, plane.shape[-1]))
    return bits.sum(axis=0, dtype=np.int64)


class SignalSim:
    """Packed ring simulator for the asymmetric or symmetric signal rule."""

    def __init__(self, n: int, cfg: RuleConfig, words: int):
        self.n = n
        self.cfg = cfg
        self.params = cfg.signal_params
        self.sh = engine.Shifts(periodic=True)
        self.step_fn = engine.ssr_step if self.params.symmetric else engine.asr_step
        self.planes = engine.Planes.zeros((n, words), self.params.ndir)
        self.data = np.zeros((n, words), dtype=np.uint64)
        self.max_stack = [np.zeros(words, dtype=np.uint64)]
        self.hard_cap = 2 * n
        self.t = 0

    def load_code_capacity(self, errors: np.ndarray) -> None:
        self.data = errors.copy()
        self.planes.defects = engine.syndrome_plane(errors, self.sh)

    def step(self, rng, noise: PhenomenologicalParams | None) -> None:
        measured = None
        if noise is not None:
            self.data ^= bernoulli_words(rng, self.data.shape, noise.eps_d)
            measured = engine.syndrome_plane(self.data, self.sh)
            measured ^= bernoulli_words(rng, self.data.shape, noise.eps_m)
        cor = self.step_fn(self.planes, self.sh, self.params.k_a, self.params.k_b, measured)
        self.data ^= cor
        self.t += 1
        self._track_stacks()

    def _track_stacks(self) -> None:
        stacks = self.planes.stacks
        if self.t % 64 == 0:
            for s in stacks:
                s.trim()
        if len(stacks[0].planes) == 1 and (len(stacks) == 1 or len(stacks[1].planes) == 1):
            cur = [np.bitwise_or.reduce(np.concatenate([s.planes[0] for s in stacks]), axis=0)]
        else:
            cur = engine.sliced_max_over_sites(stacks)
        self.max_stack = engine.sliced_max(self.max_stack, cur)
        if (1 << len(self.max_stack)) - 1 > self.hard_cap:
            top = int(self.max_stack_values().max())
            if top > self.hard_cap:
                raise StackOverflow(f"stack height {top} exceeds 2n = {self.hard_cap}")

    def max_stack_values(self) -> np.ndarray:
        out = np.zeros(64 * self.data.shape[-1], dtype=np.int64)
        for b, p in enumerate(self.max_stack):
            out += engine.unpack_words(p).astype(np.int64) << b
        return out

    def logical(self) -> np.ndarray:
        return 2 * _popcount_lanes(self.data) > self.n

    def registers_nonzero(self) -> np.ndarray:
        occ = self.planes.occupancy()
        return engine.unpack_words(np.bitwise_or.reduce(occ, axis=0)[None, :])[0].astype(bool)

    def all_zero(self) -> bool:
        return not (self.planes.occupancy().any())


class ShearingSim:
    """Packed two-row shearing-rule simulator; one time step is one substep of the cycle."""

    def __init__(self, n: int, cfg: RuleConfig, words: int):
        self.n = n
        self.lat = ca_rules.TwoRowLattice.zeros(n, cfg.periodic, (words,), np.uint64, cfg.diagonal)
        self.t = 0

    def step(self, rng, noise) -> None:
        self.lat = ca_rules.shearing_substep(self.lat, self.t % 4, noise, rng)
        self.t += 1

    def logical(self) -> np.ndarray:
        return 2 * _popcount_lanes(self.lat.bits) > self.n

    def max_stack_values(self) -> np.ndarray:
        return np.zeros(64 * self.lat.bits.shape[-1], dtype=np.int64)


class ToomSim:
    """Packed Toom's-rule simulator on a ``side x side`` grid (``n = side**2`` qubits)."""

    def __init__(self, n: int, cfg: RuleConfig, words: int):
        side = math.isqrt(n)
        if side * side != n:
            raise ValueError(f"Toom's rule needs a square number of qubits, got {n}")
        self.n = n
        self.grid = ca_rules.SquareGrid.zeros(side, (words,), np.uint64, cfg.c, cfg.boundary)
        self.t = 0

    def step(self, rng, noise) -> None:
        o = ca_rules.ORIENTATIONS[(self.t // self.grid.k_switch) % 4]
        self.grid = ca_rules.toom_step(self.grid.with_bits(self.grid.bits, o), noise, rng)
        self.t += 1

    def logical(self) -> np.ndarray:
        return 2 * _popcount_lanes(self.grid.bits) > self.n

    def max_stack_values(self) -> np.ndarray:
        return np.zeros(64 * self.grid.bits.shape[-1], dtype=np.int64)


def make_sim(cfg: RuleConfig, n: int, words: int):
    if cfg.rule in ("asr", "ssr"):
        return SignalSim(n, cfg, words)
    if cfg.rule == "shearing":
        return ShearingSim(n, cfg, words)
    return ToomSim(n, cfg, words)


# -- blocks ------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockTask:
    cfg: RuleConfig
    n: int
    noise: PhenomenologicalParams
    tau: int
    times: tuple
    seed: int
    exp_id: int
    index: int
    lanes: int
    words: int
    code_capacity: bool = False


@dataclass
class BlockResult:
    index: int
    lanes: int
    flips_at: np.ndarray  # per sample time, lanes with logical state 1
    stack_hist: np.ndarray  # histogram of per-trajectory max stack
    failures: int = 0  # code-capacity mode: lanes not returned to the zero codeword


def run_block(task: BlockTask) -> BlockResult:
    rng = RngStream(task.seed, (task.exp_id, task.index)).generator()
    sim = make_sim(task.cfg, task.n, task.words)
    valid = np.zeros(64 * task.words, dtype=bool)
    valid[: task.lanes] = True
    times = np.asarray(task.times)
    flips = np.zeros(len(times), dtype=np.int64)
    if task.code_capacity:
        errors = bernoulli_words(rng, (task.n, task.words), task.noise.eps_d)
        sim.load_code_capacity(errors)
        for _ in range(task.tau):
            if sim.all_zero():
                break
            sim.step(rng, None)
        bad = (sim.logical() | sim.registers_nonzero()) & valid
        hist = np.bincount(sim.max_stack_values()[valid])
        return BlockResult(task.index, task.lanes, flips, hist, int(bad.sum()))
    j = 0
    for t in range(1, task.tau + 1):
        sim.step(rng, task.noise)
        if j < len(times) and times[j] == t:
            flips[j] = int((sim.logical() & valid).sum())
            j += 1
    hist = np.bincount(sim.max_stack_values()[valid])
    return BlockResult(task.index, task.lanes, flips, hist)


def _blocks_in_order(tasks: Sequence[BlockTask], workers: int) -> Iterable[BlockResult]:
    if workers <= 1:
        for task in tasks:
            yield run_block(task)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        wave = 2 * workers
        for start in range(0, len(tasks), wave):
            yield from pool.map(run_block, tasks[start:start + wave])


# -- records and estimates ---------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Outcome of a single trajectory."""

    flip_observed: bool
    max_stack: int
    first_crossing_times: list = field(default_factory=list)
    seed: int = 0
    stream_id: tuple = (0, 0)
    tau: int = 0

    def __post_init__(self):
        if self.max_stack < 0:
            raise ValueError("max_stack must be non-negative")


@dataclass(frozen=True)
class LogicalRateEstimate:
    eps_L: float
    ci_low: float
    ci_high: float
    tau: int
    n_traj: int
    flips: int = 0
    censored: bool = False

    def __post_init__(self):
        if not (self.ci_low <= self.eps_L <= self.ci_high):
            raise ValueError(f"inconsistent interval {self.ci_low} <= {self.eps_L} <= {self.ci_high}")


@dataclass
class PLCurve:
    """Logical-flip fractions ``P_L(tau)`` on a grid of times, from ``n_traj`` trajectories."""

    times: np.ndarray
    flips: np.ndarray
    n_traj: int

    @property
    def p(self) -> np.ndarray:
        return self.flips / self.n_traj

    @classmethod
    def exact(cls, eps_L: float, times, n_traj: int = 10**12) -> "PLCurve":
        times = np.asarray(times)
        p = (1 - (1 - eps_L) ** times) / 2
        return cls(times, p * n_traj, n_traj)


def p_from_rate(eps_L, tau):
    """``P_L(tau) = [1 - (1 - eps_L)^tau] / 2``."""
    return (1.0 - (1.0 - np.asarray(eps_L, dtype=float)) ** tau) / 2.0


def rate_from_p(p, tau):
    """Inverse of :func:`p_from_rate` (``nan`` once ``P_L >= 1/2``)."""
    p = np.asarray(p, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return 1.0 - np.where(p < 0.5, 1.0 - 2.0 * p, np.nan) ** (1.0 / np.asarray(tau, dtype=float))


def estimate_logical_rate(curve: PLCurve, n: int | None = None, window: tuple[int, int] | None = None) -> LogicalRateEstimate:
    """Per-step logical error rate from a ``P_L(tau)`` curve.

    Fits ``ln(1 - 2 P_L) = tau * ln(1 - eps_L)`` through the origin by weighted
    least squares over the window ``[max(2n, 50), tau_max]`` (or ``window``).
    Weights come from binomial variances propagated through the logarithm.
    Points whose distance from 1/2 is within ``SATURATION_Z`` standard errors
    are saturated and left out; if the window holds no other point, the
    informative points before it are used.
    Points of one curve share trajectories and are strongly correlated, so the
    slope uncertainty is taken as the weighted mean of per-point uncertainties
    rather than the (much too small) independent-points formula. With no flips
    a one-sided upper bound is returned.
    """
    times = np.asarray(curve.times, dtype=float)
    flips = np.asarray(curve.flips, dtype=float)
    N = float(curve.n_traj)
    tau_max = int(times[-1])
    if flips[-1] == 0:
        p_up = min(ZERO_EVENT_UPPER / N, 0.5 - 1e-12)
        up = float(rate_from_p(p_up, tau_max))
        return LogicalRateEstimate(0.0, 0.0, up, tau_max, int(N), 0, censored=True)
    lo_t = max(2 * n, 50) if window is None and n is not None else (window[0] if window else times[0])
    hi_t = window[1] if window else tau_max
    p_all = flips / N
    # a point is informative only while 1/2 - P_L is resolved; saturated points
    # carry no rate information and, once p >= 1/2 is discarded, bias the slope low
    informative = (0.5 - p_all) > SATURATION_Z * np.sqrt(np.maximum(p_all, 0.5 / N) * (1 - p_all) / N)
    sel = (times >= lo_t) & (times <= hi_t) & informative
    if not sel.any():
        sel = (times <= hi_t) & informative
    if not sel.any():
        return LogicalRateEstimate(1.0, float(rate_from_p(0.5 - 1e-9, tau_max)), 1.0, tau_max, int(N), int(flips[-1]), censored=True)
    t, p = times[sel], p_all[sel]
    y = np.log1p(-2 * p)
    var_p = np.maximum(p, 0.5 / N) * (1 - p) / N
    sig = 2 * np.sqrt(var_p) / (1 - 2 * p)
    w = 1.0 / sig**2
    slope = float(np.sum(w * t * y) / np.sum(w * t * t))
    se = float(np.sum(w * t * sig) / np.sum(w * t * t))
    eps = -math.expm1(slope)
    lo = -math.expm1(slope + Z95 * se)
    hi = min(1.0, -math.expm1(slope - Z95 * se))
    return LogicalRateEstimate(eps, max(lo, 0.0), max(hi, eps), tau_max, int(N), int(flips[-1]))


@dataclass(frozen=True)
class ConvergenceTime:
    tau_n: float
    censored: bool = False


def convergence_time(curve: PLCurve, eps_L: float) -> ConvergenceTime:
    """Smallest sampled ``tau_0`` with normalised flip rate above ``eps_L / 2`` for all later samples.

    The normalised rate at ``tau`` is ``1 - (1 - 2 P_L(tau))^(1/tau)``, the
    per-step rate implied by ``P_L(tau)``. If even the last sample fails the
    condition the result is right-censored at the last time.
    """
    if eps_L <= 0:
        raise ValueError("eps_L must be positive")
    times = np.asarray(curve.times)
    r = rate_from_p(curve.p, times)
    ok = np.where(np.isnan(r), True, r > eps_L / 2)
    if not ok[-1]:
        return ConvergenceTime(float(times[-1]), censored=True)
    bad = np.flatnonzero(~ok)
    first = 0 if bad.size == 0 else bad[-1] + 1
    return ConvergenceTime(float(times[first]))


def wilson_interval(k: int, N: int, z: float = Z95) -> tuple[float, float]:
    if N == 0:
        return 0.0, 1.0
    p = k / N
    den = 1 + z * z / N
    centre = (p + z * z / (2 * N)) / den
    half = z * math.sqrt(p * (1 - p) / N + z * z / (4 * N * N)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == N else min(1.0, centre + half)
    return lo, hi


@dataclass
class SurvivalTable:
    m: np.ndarray
    survival: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_traj: int


def stack_survival(records_or_hist) -> SurvivalTable:
    """``S_M(m)``: fraction of trajectories whose maximum stack reached at least ``m``.

    Accepts a list of :class:`TrajectoryRecord` or a histogram of maximum stack values.
    """
    if len(records_or_hist) and isinstance(records_or_hist[0], TrajectoryRecord):
        hist = np.bincount([r.max_stack for r in records_or_hist])
    else:
        hist = np.asarray(records_or_hist, dtype=np.int64)
    N = int(hist.sum())
    tail = np.cumsum(hist[::-1])[::-1]
    m = np.arange(len(hist))
    s = tail / max(N, 1)
    ci = np.array([wilson_interval(int(k), N) for k in tail]).reshape(-1, 2)
    return SurvivalTable(m, s, ci[:, 0], ci[:, 1], N)


# -- single trajectories ------------------------------------------------------------------


def run_trajectory(rule: str | RuleConfig, n: int, noise: PhenomenologicalParams | None, tau: int, stream: RngStream,
                   code_capacity_eps: float | None = None, track_crossings: bool = False) -> TrajectoryRecord:
    """Run one trajectory from the zero configuration for ``tau`` steps.

    With ``code_capacity_eps`` the initial data carries i.i.d. errors and no
    further noise is applied; the flip is then judged on the final data and
    registers. ``track_crossings`` records every time the majority changes.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    cfg = rule if isinstance(rule, RuleConfig) else RuleConfig(rule)
    rng = stream.generator()
    sim = make_sim(cfg, n, 1)
    crossings = []
    if code_capacity_eps is not None:
        if cfg.rule not in ("asr", "ssr"):
            raise ValueError("code-capacity runs need a signal rule")
        sim.load_code_capacity(bernoulli_words(rng, (n, 1), code_capacity_eps))
        for _ in range(tau):
            if sim.all_zero():
                break
            sim.step(rng, None)
        flip = bool(sim.logical()[0] or sim.registers_nonzero()[0])
    else:
        prev = False
        for t in range(1, tau + 1):
            sim.step(rng, noise)
            if track_crossings:
                cur = bool(sim.logical()[0])
                if cur != prev:
                    crossings.append(t)
                prev = cur
        flip = bool(sim.logical()[0])
    return TrajectoryRecord(flip, int(sim.max_stack_values()[0]), crossings, stream.seed, stream.stream_id, tau)


# -- campaigns --------------------------------------------------------------------------------


@dataclass
class PointResult:
    """Aggregate of one parameter point."""

    rule: str
    n: int
    eps_d: float
    eps_m: float
    tau: int
    n_traj: int
    curve: PLCurve
    stack_hist: np.ndarray
    blocks: int
    failures: int = 0
    code_capacity: bool = False

    @property
    def flips(self) -> int:
        return self.failures if self.code_capacity else int(self.curve.flips[-1])

    def rate(self) -> LogicalRateEstimate:
        if self.code_capacity:
            lo, hi = wilson_interval(self.failures, self.n_traj)
            p = self.failures / self.n_traj
            return LogicalRateEstimate(p, lo, hi, 1, self.n_traj, self.failures, censored=self.failures == 0)
        return estimate_logical_rate(self.curve, self.n)

    def counts(self) -> dict:
        return {
            "n_traj": self.n_traj,
            "flips": self.flips,
            "flips_at": self.curve.flips.astype(int).tolist(),
            "stack_hist": self.stack_hist.astype(int).tolist(),
            "blocks": self.blocks,
        }


def point_id(cfg: RuleConfig, n: int, noise: PhenomenologicalParams, tau: int, code_capacity: bool, words: int) -> int:
    return experiment_id({"rule": asdict(cfg), "n": n, "noise": asdict(noise), "tau": tau, "cc": code_capacity, "words": words})


def simulate_point(cfg: RuleConfig, n: int, noise: PhenomenologicalParams, tau: int = DEFAULT_TAU, *,
                   max_trials: int = 10**7, budget_flips: int | None = 100, seed: int = 0,
                   words: int = 16, workers: int = 1, code_capacity: bool = False,
                   times: Sequence[int] | None = None) -> PointResult:
    """Run blocks of trajectories until ``budget_flips`` flips (at ``tau``) or ``max_trials`` trajectories.

    In code-capacity mode ``noise.eps_d`` is the i.i.d. error probability, each
    trajectory runs at most ``tau`` iterations, and a *flip* is any trajectory
    that does not return to the zero configuration with the zero codeword.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if max_trials < 1:
        raise ValueError("max_trials must be >= 1")
    times = tuple(int(x) for x in (sample_times(tau) if times is None else times))
    if code_capacity:
        times = (tau,)
    if times[-1] != tau:
        raise ValueError("sample times must end at tau")
    lanes_per_block = 64 * words
    nblocks = -(-max_trials // lanes_per_block)
    eid = point_id(cfg, n, noise, tau, code_capacity, words)
    tasks = [
        BlockTask(cfg, n, noise, tau, times, seed, eid, b,
                  min(lanes_per_block, max_trials - b * lanes_per_block), words, code_capacity)
        for b in range(nblocks)
    ]
    flips_at = np.zeros(len(times), dtype=np.int64)
    hist = np.zeros(1, dtype=np.int64)
    total = failures = used = 0
    for res in _iter_until(tasks, workers, budget_flips, code_capacity):
        flips_at += res.flips_at
        if len(res.stack_hist) > len(hist):
            hist = np.pad(hist, (0, len(res.stack_hist) - len(hist)))
        hist[: len(res.stack_hist)] += res.stack_hist
        total += res.lanes
        failures += res.failures
        used += 1
    return PointResult(cfg.rule, n, noise.eps_d, noise.eps_m, tau, total, PLCurve(np.array(times), flips_at, total),
                       hist, used, failures, code_capacity)


def _iter_until(tasks, workers, budget, code_capacity):
    got = 0
    for res in _blocks_in_order(tasks, workers):
        yield res
        got += res.failures if code_capacity else int(res.flips_at[-1])
        if budget is not None and got >= budget:
            return


def aggregate_records(records: Iterable[TrajectoryRecord]) -> dict:
    """Order-independent summary of single-trajectory records."""
    recs = list(records)
    flips = sum(r.flip_observed for r in recs)
    hist = np.bincount([r.max_stack for r in recs]) if recs else np.zeros(1, dtype=np.int64)
    return {"n_traj": len(recs), "flips": int(flips), "stack_hist": hist.tolist()}
