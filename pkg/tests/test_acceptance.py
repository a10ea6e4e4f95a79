"""End-to-end acceptance suite.

Each test numbers one acceptance criterion; timing budgets are asserted
with wall-clock measurements around the relevant calls only.
"""

import random
import time
from fractions import Fraction as F
from pathlib import Path

import pytest

from dsmv.cfg import build_cfg, loop_forest, loop_subcfg
from dsmv.derivation import check_derivation, parse_derivation
from dsmv.dsm import check_dsm, parse_dsm
from dsmv.engine import NotProved, Proved, prove_termination
from dsmv.frontend import parse_program
from dsmv.invariants import guard_default_invariant, load_invariant
from dsmv.linexpr import LinearExpr
from dsmv.ratlp import Polyhedron, polyhedron_includes
from dsmv.simulator import (
    Configuration,
    Scheduler,
    barrier_absorption_prob,
    hoeffding_bound,
    run_many,
)
from dsmv.synthesis import Fail, Success, synthesize_dsm

from _oracles import (
    barrier_hit_prob_enumerated,
    drifted_walk_tail,
    polyhedron_inclusion_oracle,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_case(name):
    prog = parse_program((FIXTURES / "programs" / f"{name}.pp").read_text())
    cfg = build_cfg(prog)
    invpath = FIXTURES / "invariants" / f"{name}.inv"
    if invpath.exists():
        inv = load_invariant(invpath.read_text(), cfg)
    else:
        inv = guard_default_invariant(cfg)
    return prog, cfg, inv


def outer_loop(name):
    prog, cfg, inv = load_case(name)
    node = loop_forest(cfg, prog)[0]
    return loop_subcfg(cfg, node), inv, cfg.dists


def cert(name):
    return parse_dsm((FIXTURES / "certs" / f"{name}.dsm").read_text())


# --- criterion 1: certificate regression checks ----------------------------


@pytest.mark.parametrize(
    "cert_name,prog_name",
    [
        ("program1", "program1"),
        ("program2", "program2"),
        ("mini_roulette_synth", "mini_roulette"),
        ("mini_roulette_hand", "mini_roulette"),
    ],
)
def test_criterion1_stored_certificates_pass(cert_name, prog_name):
    loop, inv, dists = outer_loop(prog_name)
    start = time.monotonic()
    report = check_dsm(cert(cert_name), loop, inv, dists)
    elapsed = time.monotonic() - start
    assert report.verdict, [v.detail for v in report.violations]
    assert elapsed < 1.0


def test_criterion1_three_level_nest_certificate_fails_honestly():
    # The stored three-level-nest certificate is genuinely invalid: its
    # middle-loop exit edge cannot satisfy the bounded-difference condition
    # (see the certificate header comment).  The checker must say so rather
    # than pass it.
    loop, inv, dists = outer_loop("program3")
    start = time.monotonic()
    report = check_dsm(cert("program3"), loop, inv, dists)
    elapsed = time.monotonic() - start
    assert not report.verdict
    v = report.violations[0]
    assert (v.condition, v.label, v.transition) == ("D2", 6, "6->9")
    assert elapsed < 1.0


# --- criterion 2: synthesis matrix -----------------------------------------


@pytest.mark.parametrize(
    "name,expect_success",
    [
        ("mini_roulette", True),
        ("program1", True),
        ("program2", True),
        ("program3", True),
        ("counterexample", False),
    ],
)
def test_criterion2_outermost_loop_synthesis(name, expect_success):
    loop, inv, dists = outer_loop(name)
    start = time.monotonic()
    outcome = synthesize_dsm(loop, inv, dists)
    elapsed = time.monotonic() - start
    assert elapsed < 2.0, (name, elapsed)
    if expect_success:
        assert isinstance(outcome, Success), name
        assert check_dsm(outcome.dsm, loop, inv, dists).verdict
    else:
        assert outcome == Fail("LP-infeasible")


# --- criterion 3: classic single-loop benchmarks ---------------------------


@pytest.mark.parametrize("name", ["ber", "bin", "geo", "rdwalk", "sprdwalk"])
def test_criterion3_benchmarks_proved(name):
    prog, cfg, inv = load_case(name)
    start = time.monotonic()
    result = prove_termination(prog, inv, cfg.dists)
    elapsed = time.monotonic() - start
    assert isinstance(result, Proved), name
    assert elapsed < 2.0, (name, elapsed)


# --- criterion 4: hand-written derivation and its mutants ------------------


DERIVATION = (FIXTURES / "derivations" / "nested_walk.drv").read_text()


def test_criterion4_derivation_valid():
    report = check_derivation(parse_derivation(DERIVATION))
    assert report.valid, report.failures


def _mutate(old, new, count=-1):
    assert old in DERIVATION, old
    return DERIVATION.replace(old, new, count)


MUTANTS = [
    # (mutated text, step that must be reported invalid)
    (lambda: _mutate("post: 6*y + 2", "post: 6*y + 3"), "i"),
    (lambda: _mutate("pre: 6*y + 2", "pre: 6*y - 2"), "ii"),
    (lambda: _mutate("post: 6*y\n", "post: 6*y + 1\n"), "iv"),
    (lambda: _mutate("pre: 6*y + 1", "pre: 6*y - 1"), "iv"),
    (lambda: _mutate("post: 10*x + 1", "post: 10*x + 6", 1), "ix"),
    (lambda: _mutate("post: 10*x\n", "post: 10*x + 1\n", 1), "xiii"),
    (lambda: _mutate("uses xiv xv", "uses xiv xiv"), "xvii"),
    (
        lambda: _mutate(
            "step xix rule 1 curly uses xviii\n",
            "step xix rule 1 curly uses xviii\nwith c: 4\n",
        ),
        "xix",
    ),
    (lambda: _mutate("uses xxv xix", "uses xxiii xix"), "xxvi"),
    (lambda: _mutate("uses vii iv", "uses vii iii"), "viii"),
]


@pytest.mark.parametrize("case", range(len(MUTANTS)))
def test_criterion4_mutants_are_rejected_at_the_mutated_step(case):
    make, step_name = MUTANTS[case]
    text = make()
    assert text != DERIVATION
    report = check_derivation(parse_derivation(text))
    assert not report.valid
    assert step_name in [name for name, _, _ in report.failures]


# --- criterion 5: barrier absorption, exact and Monte-Carlo ----------------


def test_criterion5_barrier_probabilities():
    start = time.monotonic()
    assert barrier_absorption_prob(2) == F(1, 2)
    assert barrier_absorption_prob(4) == F(5, 8)
    assert barrier_absorption_prob(6) == F(11, 16)
    assert barrier_absorption_prob(8) == barrier_hit_prob_enumerated(8)

    cfg = build_cfg(
        parse_program((FIXTURES / "programs" / "barrier_walk.pp").read_text())
    )
    import math

    for yhat in (2, 4, 6, 8):
        init = Configuration(cfg.l_in, {"x": 1, "z": yhat - 1})
        stats = run_many(cfg, init, Scheduler(), 100_000, 10 * yhat + 10,
                         seed=1000 + yhat)
        assert stats.terminated == stats.runs
        hits = sum(1 for v in stats.final_valuations if v["x"] == 2)
        p = float(barrier_absorption_prob(yhat))
        sigma = math.sqrt(p * (1 - p) / stats.runs)
        assert abs(hits / stats.runs - p) <= 3 * sigma, yhat
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, elapsed


# --- criterion 6: counterexample survival analysis -------------------------


def test_criterion6_survival_beats_the_analytic_bound():
    from dsmv.ceanalysis import analyze_ce

    start = time.monotonic()
    result = analyze_ce(100, 10, 10_000, seed=11)
    elapsed = time.monotonic() - start
    assert result["agrees"]
    assert float(result["empirical_survival"]) >= (
        float(result["analytic_lower_bound"]) - 3 * result["empirical_sigma"]
    )
    assert elapsed < 60.0, elapsed


# --- criterion 7: concentration bound vs exact tails -----------------------


def test_criterion7_exact_tails_below_the_concentration_bound():
    start = time.monotonic()
    eps, a, b, p_up = F(1, 2), F(-1), F(1), F(1, 4)
    checked = 0
    for n in range(1, 15):
        lam = F(-n) + F(1, 2)  # 0.5-grid
        while lam <= n:
            if lam + n * eps > 0:
                exact = drifted_walk_tail(n, lam, p_up)
                bound = hoeffding_bound(n, lam, a, b, eps)
                assert exact <= bound, (n, lam, exact, bound)
                checked += 1
            lam += F(1, 2)
    assert checked > 100
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, elapsed


# --- criterion 8: scale invariance and LP determinism ----------------------


def test_criterion8_scaled_certificates_keep_their_verdicts():
    for lam in (F(1, 3), F(2), F(299)):
        for name, prog_name in (
            ("program1", "program1"),
            ("program2", "program2"),
            ("mini_roulette_synth", "mini_roulette"),
            ("mini_roulette_hand", "mini_roulette"),
        ):
            loop, inv, dists = outer_loop(prog_name)
            assert check_dsm(cert(name).scaled(lam), loop, inv, dists).verdict
        loop, inv, dists = outer_loop("program3")
        report = check_dsm(cert("program3").scaled(lam), loop, inv, dists)
        assert not report.verdict
        v = report.violations[0]
        assert (v.condition, v.label, v.transition) == ("D2", 6, "6->9")


def test_criterion8_farkas_agrees_with_the_enumeration_oracle():
    rng = random.Random(2024)
    agreed = 0
    while agreed < 500:
        m = rng.randint(1, 5)
        rows = [[rng.randint(-3, 3), rng.randint(-3, 3)] for _ in range(m)]
        rhs = [rng.randint(-4, 4) for _ in range(m)]
        c = [rng.randint(-3, 3), rng.randint(-3, 3)]
        d = rng.randint(-6, 6)
        expected = polyhedron_inclusion_oracle(rows, rhs, c, d)
        if expected is None:
            continue  # empty polyhedron: nothing to compare
        h = Polyhedron(
            ("x", "y"),
            tuple(tuple(F(v) for v in r) for r in rows),
            tuple(F(k) for k in rhs),
        )
        got = polyhedron_includes(
            h, LinearExpr({"x": F(c[0]), "y": F(c[1])}), F(d)
        )
        assert got == expected, (rows, rhs, c, d)
        agreed += 1


def test_criterion8_lp_dump_is_byte_identical_across_runs(tmp_path):
    from dsmv.cli import main

    paths = [tmp_path / "run1.lp", tmp_path / "run2.lp"]
    for p in paths:
        code = main([
            "synth", str(FIXTURES / "programs" / "program2.pp"),
            "--inv", str(FIXTURES / "invariants" / "program2.inv"),
            "--loop", "1", "--dump-lp", str(p),
        ])
        assert code == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].stat().st_size > 0
