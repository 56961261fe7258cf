"""Command-line interface: ``cadecoders simulate | sweep | trace | render | verify``.

Records are JSON lines. Every output file starts with a header line holding
the full configuration, its hash, the seed and a timestamp; the remaining
lines are deterministic functions of the header (except the timestamp).

Exit codes: 0 success, 2 configuration error, 3 verification failure, 4 I/O error.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__, oracles
from .config import ConfigError, ExperimentConfig, load_config_file
from .lattice import DecoderState, StackOverflow, edge_bits
from .montecarlo import PointResult, RuleConfig, convergence_time, simulate_point
from .noise import PhenomenologicalParams
from .render import render as render_trace
from .signal_rules import SignalRuleParams, Trace, run, window_state

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4


class VerificationFailed(click.ClickException):
    exit_code = EXIT_VERIFY


class IOFailure(click.ClickException):
    exit_code = EXIT_IO


class ConfigFailure(click.ClickException):
    exit_code = EXIT_CONFIG


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


@contextmanager
def _output(path, binary: bool = False):
    if path in (None, "-"):
        yield sys.stdout.buffer if binary else sys.stdout
        return
    try:
        fh = open(path, "wb" if binary else "w")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    with fh:
        yield fh


def header(cfg: ExperimentConfig, kind: str, extra: dict | None = None) -> dict:
    h = {
        "type": "header",
        "kind": kind,
        "version": __version__,
        "config": cfg.as_dict(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        h.update(extra)
    return h


def point_record(cfg: ExperimentConfig, res: PointResult) -> dict:
    """One JSON-lines record for a parameter point."""
    est = res.rate()
    rec = {
        "type": "point",
        "rule": cfg.rule,
        "n": cfg.n,
        "eps_d": cfg.eps_d,
        "eps_m": cfg.eps_m,
        "tau": cfg.tau,
        "code_capacity": cfg.code_capacity,
        "eps_L": est.eps_L,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "censored": est.censored,
        "max_stack": int(np.flatnonzero(res.stack_hist)[-1]) if res.stack_hist.any() else 0,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "times": res.curve.times.astype(int).tolist(),
    }
    rec.update(res.counts())
    if not cfg.code_capacity and not est.censored and est.eps_L < 1:
        ct = convergence_time(res.curve, est.eps_L)
        rec["tau_n"] = ct.tau_n
        rec["tau_n_censored"] = ct.censored
    return rec


def run_point(cfg: ExperimentConfig) -> PointResult:
    return simulate_point(cfg.rule_config, cfg.n, cfg.noise, cfg.tau, max_trials=cfg.trials,
                          budget_flips=cfg.budget_flips, seed=cfg.seed, words=cfg.words,
                          workers=cfg.workers, code_capacity=cfg.code_capacity)


def _build_config(config_path, **flags) -> ExperimentConfig:
    base = {}
    if config_path:
        try:
            base = load_config_file(config_path)
        except OSError as exc:
            raise IOFailure(f"cannot read {config_path}: {exc}") from exc
    try:
        return ExperimentConfig.from_mapping(base).with_overrides(**flags)
    except (ConfigError, ValueError) as exc:
        raise ConfigFailure(str(exc)) from exc


def _common(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(), default=None, help="YAML file with the same keys as the flags."),
        click.option("--rule", type=click.Choice(["asr", "ssr", "shearing", "toom"]), default=None),
        click.option("--eps", type=float, default=None, help="Sets both eps_d and eps_m."),
        click.option("--eps-d", type=float, default=None),
        click.option("--eps-m", type=float, default=None),
        click.option("--tau", type=int, default=None),
        click.option("--trials", type=int, default=None, help="Maximum number of trajectories."),
        click.option("--budget-flips", type=int, default=None, help="Stop once this many logical flips were seen."),
        click.option("--seed", type=int, default=None),
        click.option("--ka", type=int, default=None),
        click.option("--kb", type=int, default=None),
        click.option("--workers", type=int, default=None),
        click.option("--code-capacity/--phenomenological", default=None),
        click.option("--out", type=click.Path(), default=None),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


@click.group()
@click.version_option(__version__)
def cli():
    """Cellular-automaton decoders for the repetition code."""


@cli.command()
@_common
@click.option("--n", type=int, default=None)
def simulate(config_path, out, **flags):
    """Run one parameter point and write its record."""
    cfg = _build_config(config_path, out=out, **flags)
    try:
        res = run_point(cfg)
    except StackOverflow as exc:
        raise VerificationFailed(str(exc)) from exc
    with _output(cfg.out) as fh:
        fh.write(_dumps(header(cfg, "simulate")) + "\n")
        fh.write(_dumps(point_record(cfg, res)) + "\n")


def _parse_list(text, cast):
    if text is None:
        return None
    items = [x for x in str(text).replace(" ", "").split(",") if x]
    return [cast(x) for x in items]


@cli.command()
@_common
@click.option("--n", "n_list", default=None, help="Comma-separated sizes.")
@click.option("--eps-list", default=None, help="Comma-separated values, each used for both noise rates.")
@click.option("--eps-d-list", default=None)
@click.option("--eps-m-list", default=None)
@click.option("--table", type=click.Path(), default=None, help="CSV file for the fit input table.")
def sweep(config_path, out, n_list, eps_list, eps_d_list, eps_m_list, table, **flags):
    """Cartesian sweep over sizes and noise rates, one record per point."""
    base = {}
    if config_path:
        try:
            base = load_config_file(config_path)
        except OSError as exc:
            raise IOFailure(f"cannot read {config_path}: {exc}") from exc
    lists = {}
    for key, text, cast in (("n", n_list, int), ("eps", eps_list, float), ("eps_d", eps_d_list, float), ("eps_m", eps_m_list, float)):
        val = _parse_list(text, cast)
        if val is None and isinstance(base.get(key), list):
            val = list(base.pop(key))
        elif isinstance(base.get(key), list):
            base.pop(key)
        if val is not None:
            if not val:
                raise ConfigFailure(f"empty list for {key}")
            lists[key] = val
    if "n" not in lists or not ({"eps", "eps_d"} & set(lists)):
        raise ConfigFailure("a sweep needs a list of sizes and a list of noise rates")
    cfg0 = _build_config(None, **{**base, "out": out, **flags})
    axes = [(k, v) for k, v in lists.items()]
    rows = []
    with _output(cfg0.out) as fh:
        fh.write(_dumps(header(cfg0, "sweep", {"axes": dict(axes)})) + "\n")
        for combo in itertools.product(*(v for _, v in axes)):
            kw = dict(zip((k for k, _ in axes), combo))
            try:
                cfg = cfg0.with_overrides(**kw)
            except (ConfigError, ValueError) as exc:
                raise ConfigFailure(str(exc)) from exc
            try:
                rec = point_record(cfg, run_point(cfg))
            except StackOverflow as exc:
                raise VerificationFailed(str(exc)) from exc
            fh.write(_dumps(rec) + "\n")
            fh.flush()
            rows.append(rec)
    if table:
        write_table(rows, table)


TABLE_FIELDS = ("rule", "n", "eps_d", "eps_m", "tau", "n_traj", "flips", "eps_L", "ci_low", "ci_high", "censored", "tau_n", "max_stack")


def write_table(rows, path) -> None:
    """CSV fit-input table (one row per point)."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in TABLE_FIELDS})
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


@cli.command()
@click.option("--rule", type=click.Choice(["asr", "ssr"]), default="asr")
@click.option("--sigma", default=None, help="Comma-separated defect positions on the line (window mode).")
@click.option("--errors", default=None, help="Comma-separated erroneous edges on a ring of size --n.")
@click.option("--n", type=int, default=None)
@click.option("--t-max", type=int, default=None, help="Iterations (default: until empty, at most 80 * width).")
@click.option("--ka", type=int, default=3)
@click.option("--kb", type=int, default=3)
@click.option("--snapshot-every", type=int, default=1)
@click.option("--out", type=click.Path(), required=True, help="Destination .npz file.")
def trace(rule, sigma, errors, n, t_max, ka, kb, snapshot_every, out):
    """Record a noiseless space-time trace of a signal rule."""
    try:
        params = SignalRuleParams(ka, kb, rule == "ssr")
        if sigma is not None:
            s = _parse_list(sigma, int)
            st = window_state(s, params.ndir)
            limit = 80 * (max(s) - min(s)) + 1
        elif errors is not None and n:
            st = DecoderState.from_error(edge_bits(n, _parse_list(errors, int)), params.ndir)
            limit = 80 * n
        else:
            raise ConfigFailure("give --sigma, or --errors together with --n")
        if snapshot_every < 1:
            raise ConfigFailure("--snapshot-every must be >= 1")
    except (ValueError, ConfigError) as exc:
        raise ConfigFailure(str(exc)) from exc
    tr = run(st, params, t_max if t_max is not None else limit, stride=snapshot_every, stop_when_zero=t_max is None)
    try:
        tr.to_npz(out)
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc}") from exc
    click.echo(_dumps({"type": "trace", "frames": len(tr), "t_final": int(tr.times[-1]), "out": out}))


@cli.command()
@click.argument("trace_file", type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["text", "ppm", "svg"]), default="text")
@click.option("--out", type=click.Path(), default=None)
def render(trace_file, fmt, out):
    """Draw a recorded trace (time downward, sites across)."""
    try:
        tr = Trace.from_npz(trace_file)
    except (OSError, KeyError, ValueError) as exc:
        raise IOFailure(f"cannot read trace {trace_file}: {exc}") from exc
    try:
        img = render_trace(tr, fmt)
    except ValueError as exc:
        raise ConfigFailure(str(exc)) from exc
    binary = isinstance(img, bytes)
    with _output(out, binary) as fh:
        fh.write(img)


SUITES = ("erasure", "charge", "frontier", "chunks", "oracle")


@cli.command()
@click.argument("suite", type=click.Choice(SUITES))
@click.option("--cases", type=int, default=1000)
@click.option("--max-pairs", type=int, default=4)
@click.option("--max-width", type=int, default=50)
@click.option("--seed", type=int, default=0)
@click.option("--ka", type=int, default=3)
@click.option("--kb", type=int, default=3)
@click.option("--trials", type=int, default=100_000, help="Monte-Carlo trajectories per point (oracle suite).")
@click.option("--out", type=click.Path(), default=None)
def verify(suite, cases, max_pairs, max_width, seed, ka, kb, trials, out):
    """Run a property campaign; exit 3 if any check fails."""
    try:
        params = SignalRuleParams(ka, kb)
    except ValueError as exc:
        raise ConfigFailure(str(exc)) from exc
    if cases < 1 or max_pairs < 1 or max_width < 1:
        raise ConfigFailure("sizes must be positive")
    t0 = time.perf_counter()
    violations: list[dict] = []
    summary: dict = {"suite": suite, "seed": seed}
    if suite in ("erasure", "charge"):
        sigmas = oracles.random_defect_sets(cases, max_pairs, max_width, seed)
        rep = oracles.erasure_campaign(sigmas, params, check_charges=suite == "charge")
        chosen = rep.erasure if suite == "erasure" else rep.charge
        violations = [v.as_dict() for v in chosen.violations]
        summary.update(cases=cases, passed=rep.n_pass if suite == "erasure" else cases - len({v["case"] for v in violations}))
    elif suite == "frontier":
        from .signal_rules import asr_run

        for i, s in enumerate(oracles.random_defect_sets(cases, max_pairs, max_width, seed)):
            tr = asr_run(window_state(s), params, t_max=80 * (s[-1] - s[0]), stop_when_zero=True)
            for rep in (oracles.check_frontier_lemmas(tr), oracles.check_recombination_lemma(tr)):
                for v in rep.violations[:1]:
                    d = v.as_dict()
                    d["case"] = i
                    d["sigma"] = s
                    violations.append(d)
        summary.update(cases=cases)
    elif suite == "chunks":
        rng = np.random.default_rng(seed)
        for i in range(cases):
            n = int(rng.integers(20, 400))
            pts = sorted(set(rng.integers(0, n, int(rng.integers(1, 14))).tolist()))
            dec = oracles.chunk_decomposition(pts, L=6, n=n)
            for lvl, comp, kind, val, bound in dec.violations:
                violations.append({"case": i, "n": n, "errors": pts, "level": lvl, "component": comp,
                                   "check": kind, "observed": val, "bound": bound})
        summary.update(cases=cases)
    else:
        for n, eps in itertools.product((5, 7, 9), (0.05, 0.1, 0.2)):
            ex = oracles.exact_logical_probability("asr", n, eps, k_a=ka, k_b=kb).probability
            res = simulate_point(RuleConfig("asr", ka, kb), n, PhenomenologicalParams(eps, 0.0), 77 * n,
                                 max_trials=trials, budget_flips=None, seed=seed, code_capacity=True)
            est = res.rate()
            ok = est.ci_low <= ex <= est.ci_high
            if not ok:
                violations.append({"n": n, "eps": eps, "exact": ex, "estimate": est.eps_L,
                                   "ci": [est.ci_low, est.ci_high]})
        summary.update(points=9, trials=trials)
    summary.update(violations=len(violations), seconds=round(time.perf_counter() - t0, 3), ok=not violations)
    with _output(out) as fh:
        for v in violations[:1000]:
            fh.write(_dumps({"type": "violation", **v}) + "\n")
        fh.write(_dumps({"type": "summary", **summary}) + "\n")
    if violations:
        raise VerificationFailed(f"{suite}: {len(violations)} violation(s)")


def main(argv=None) -> int:
    """Entry point mapping exceptions onto the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="cadecoders", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code if exc.exit_code in (EXIT_CONFIG, EXIT_VERIFY, EXIT_IO) else EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    except OSError as exc:
        click.echo(f"Error: {exc}", err=True)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
