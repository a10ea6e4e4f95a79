"""Command-line interface.

Exit codes: 0 = success / proved / valid; 1 = not proved / check failed /
LP infeasible; 2 = input or usage error.
"""

from __future__ import annotations

import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import click

from .ceanalysis import analyze_ce
from .cfg import build_cfg, emit_dot, iter_loops, loop_forest, loop_subcfg
from .derivation import check_derivation, parse_derivation
from .dsm import check_dsm, check_partial_dsm, parse_dsm, render_dsm
from .engine import NotProved, Proved, loop_terms, prove_termination
from .errors import DsmvError
from .frontend import parse_program
from .invariants import guard_default_invariant, load_invariant
from .ratlp import dump_lp
from .simulator import Configuration, Scheduler, run_many
from .synthesis import Fail, Success, assemble_lp, make_template, synthesize_dsm


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit(report: dict, as_json: bool):
    if as_json:
        click.echo(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    else:
        for key, value in report.items():
            click.echo(f"{key}: {_jsonable(value)}")


def _load_program(path: str):
    return parse_program(Path(path).read_text())


def _load_inv(inv_path, cfg):
    if inv_path is None:
        return guard_default_invariant(cfg)
    return load_invariant(Path(inv_path).read_text(), cfg)


def _find_loop(cfg, prog, label):
    forest = loop_forest(cfg, prog)
    nodes = list(iter_loops(forest))
    if not nodes:
        raise click.UsageError("the program has no while loops")
    if label is None:
        if len(forest) == 1:
            return forest[0]
        raise click.UsageError(
            f"multiple top-level loops ({[n.label for n in forest]}); pass --loop"
        )
    for n in nodes:
        if n.label == label:
            return n
    raise click.UsageError(f"no while loop at label {label}")


@click.group()
def cli():
    """Almost-sure-termination prover based on descent supermartingale maps."""


@cli.command("parse")
@click.argument("program", type=click.Path(exists=True))
@click.option("--emit-cfg", type=click.Path(), help="write the CFG in DOT format")
@click.option("--json", "as_json", is_flag=True)
def cmd_parse(program, emit_cfg, as_json):
    """Parse a program and report its structure."""
    prog = _load_program(program)
    cfg = build_cfg(prog)
    if emit_cfg:
        Path(emit_cfg).write_text(emit_dot(cfg))
    _emit(
        {
            "labels": sorted(cfg.labels),
            "terminal": cfg.l_out,
            "pvars": list(prog.pvars),
            "rvars": list(prog.rvars),
            "loops": [n.label for n in iter_loops(loop_forest(cfg, prog))],
        },
        as_json,
    )


@cli.command("synth")
@click.argument("program", type=click.Path(exists=True))
@click.option("--inv", "inv_path", type=click.Path(exists=True))
@click.option("--loop", "loop_label", type=int, default=None)
@click.option("--dump-lp", "dump_path", type=click.Path())
@click.option("--emit-cert", "cert_path", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def cmd_synth(program, inv_path, loop_label, dump_path, cert_path, as_json):
    """Synthesize a DSM-map for one while loop."""
    prog = _load_program(program)
    cfg = build_cfg(prog)
    inv = _load_inv(inv_path, cfg)
    node = _find_loop(cfg, prog, loop_label)
    sub = loop_subcfg(cfg, node)
    if dump_path:
        lp = assemble_lp(make_template(sub), sub, inv, prog.dists)
        Path(dump_path).write_text(dump_lp(lp))
    start = time.monotonic()
    outcome = synthesize_dsm(sub, inv, prog.dists)
    elapsed = time.monotonic() - start
    if isinstance(outcome, Fail):
        _emit({"result": "fail", "reason": outcome.reason,
               "runtime_seconds": round(elapsed, 3)}, as_json)
        sys.exit(1)
    assert isinstance(outcome, Success)
    dsm = outcome.dsm
    if cert_path:
        Path(cert_path).write_text(render_dsm(dsm))
    _emit(
        {
            "result": "success",
            "runtime_seconds": round(elapsed, 3),
            "eta_head": dsm.eta[sub.l_in].render(),
            "interval": [dsm.a, dsm.b],
            "eps": dsm.epsilon,
            "c": dsm.c,
        },
        as_json,
    )


@cli.command("check")
@click.argument("program", type=click.Path(exists=True))
@click.option("--cert", "cert_path", type=click.Path(exists=True), required=True)
@click.option("--inv", "inv_path", type=click.Path(exists=True))
@click.option("--loop", "loop_label", type=int, default=None)
@click.option("--partial", is_flag=True, help="skip the loop-head lower bound (D5)")
@click.option("--json", "as_json", is_flag=True)
def cmd_check(program, cert_path, inv_path, loop_label, partial, as_json):
    """Check a DSM-map certificate against a loop."""
    prog = _load_program(program)
    cfg = build_cfg(prog)
    inv = _load_inv(inv_path, cfg)
    node = _find_loop(cfg, prog, loop_label)
    sub = loop_subcfg(cfg, node)
    dsm = parse_dsm(Path(cert_path).read_text())
    checker = check_partial_dsm if partial else check_dsm
    report = checker(dsm, sub, inv, prog.dists)
    _emit(
        {
            "verdict": "pass" if report.verdict else "fail",
            "violations": [
                {"condition": v.condition, "label": v.label,
                 "transition": v.transition, "detail": v.detail}
                for v in report.violations
            ],
        },
        as_json,
    )
    sys.exit(0 if report.verdict else 1)


@cli.command("prove")
@click.argument("program", type=click.Path(exists=True))
@click.option("--inv", "inv_path", type=click.Path(exists=True))
@click.option("--emit-cert", "cert_path", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def cmd_prove(program, inv_path, cert_path, as_json):
    """Prove whole-program almost-sure termination."""
    prog = _load_program(program)
    cfg = build_cfg(prog)
    inv = _load_inv(inv_path, cfg)
    start = time.monotonic()
    result = prove_termination(prog, inv, prog.dists)
    elapsed = time.monotonic() - start
    if isinstance(result, NotProved):
        _emit({"result": "not-proved", "loop": result.label,
               "reason": result.reason,
               "runtime_seconds": round(elapsed, 3)}, as_json)
        sys.exit(1)
    assert isinstance(result, Proved)
    loops = list(loop_terms(result.certificate))
    if cert_path:
        Path(cert_path).write_text(
            "".join(
                f"# loop {t.label}\n{render_dsm(t.dsm)}\n" for t in loops
            )
        )
    _emit(
        {
            "result": "proved",
            "runtime_seconds": round(elapsed, 3),
            "loops": [
                {"label": t.label, "eta_head": t.dsm.eta[t.label].render(),
                 "interval": [t.dsm.a, t.dsm.b]}
                for t in loops
            ],
        },
        as_json,
    )


@cli.command("check-derivation")
@click.argument("derivation", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def cmd_check_derivation(derivation, as_json):
    """Check a hand-written Hoare-style termination derivation."""
    deriv = parse_derivation(Path(derivation).read_text())
    report = check_derivation(deriv)
    _emit(
        {
            "verdict": "valid" if report.valid else "invalid",
            "steps": len(deriv.steps),
            "failures": [
                {"step": name, "rule": rule, "reason": reason}
                for name, rule, reason in report.failures
            ],
            "effective_params": report.effective_params,
        },
        as_json,
    )
    sys.exit(0 if report.valid else 1)


@cli.command("sim")
@click.argument("program", type=click.Path(exists=True))
@click.option("--init", "init_text", required=True,
              help='initial valuation, e.g. "x=1,y=100"')
@click.option("--runs", type=int, default=10000, show_default=True)
@click.option("--budget", type=int, default=100000, show_default=True)
@click.option("--sched", type=click.Choice(["then", "else", "uniform", "roundrobin"]),
              default="then", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--trace-dsm", "trace_path", type=click.Path(exists=True),
              help="certificate whose per-step differences to histogram")
@click.option("--json", "as_json", is_flag=True)
def cmd_sim(program, init_text, runs, budget, sched, seed, trace_path, as_json):
    """Monte-Carlo termination estimation."""
    prog = _load_program(program)
    cfg = build_cfg(prog)
    valuation = {}
    for item in init_text.split(","):
        key, _, value = item.partition("=")
        valuation[key.strip()] = int(value.strip())
    for v in prog.pvars:
        valuation.setdefault(v, 0)
    init = Configuration(cfg.l_in, valuation)
    stats = run_many(cfg, init, Scheduler(sched), runs, budget, seed)
    lo, hi = stats.wilson_interval()
    report = {
        "runs": stats.runs,
        "terminated": stats.terminated,
        "censored": stats.runs - stats.terminated,
        "termination_frequency": stats.termination_frequency,
        "wilson_3sigma": [round(lo, 6), round(hi, 6)],
    }
    if trace_path:
        from .simulator import run_trace, trace_eta

        dsm = parse_dsm(Path(trace_path).read_text())
        trace = run_trace(cfg, init, Scheduler(sched), min(budget, 1000), seed)
        mt = trace_eta(cfg, dsm, trace)
        diffs = [mt.xs[i + 1] - mt.xs[i] for i in range(len(mt.xs) - 1)]
        report["trace_diff_min"] = min(diffs) if diffs else None
        report["trace_diff_max"] = max(diffs) if diffs else None
    _emit(report, as_json)


@cli.command("analyze-ce")
@click.option("--y0", type=int, required=True)
@click.option("--k", type=int, required=True)
@click.option("--runs", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--json", "as_json", is_flag=True)
def cmd_analyze_ce(y0, k, runs, seed, as_json):
    """Survival analysis of the doubling-walk counterexample."""
    report = analyze_ce(y0, k, runs, seed)
    _emit(report, as_json)
    sys.exit(0 if report["agrees"] else 1)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except SystemExit as exc:  # raised by sys.exit in subcommands
        code = exc.code if isinstance(exc.code, int) else 2
        return code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 2
    except (DsmvError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
