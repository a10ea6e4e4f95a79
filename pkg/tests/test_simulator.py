from fractions import Fraction as F
from pathlib import Path

import pytest

from dsmv.cfg import build_cfg
from dsmv.dsm import DSMMap, parse_dsm
from dsmv.errors import CoverageError, DomainError
from dsmv.frontend import parse_program
from dsmv.linexpr import LinearExpr
from dsmv.simulator import (
    Configuration,
    Scheduler,
    barrier_absorption_prob,
    hoeffding_bound,
    nontermination_lower_bound,
    run_many,
    run_trace,
    stirling_failure_constant,
    trace_eta,
)

from _oracles import barrier_hit_prob_enumerated

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    return build_cfg(parse_program((FIXTURES / "programs" / name).read_text()))


def test_deterministic_countdown_takes_exactly_seven_steps():
    # [DERIVED] from x = 3: guard(1), assign(2) three times, then the exit
    # guard evaluation: 3*2 + 1 = 7 configurations after the initial one.
    cfg = build_cfg(parse_program("while x >= 1 do x := x - 1 od"))
    trace = run_trace(cfg, Configuration(1, {"x": 3}), Scheduler(), 100, seed=0)
    assert trace[-1].label == cfg.l_out
    assert len(trace) - 1 == 7
    assert trace[-1].valuation == {"x": 0}


def test_run_trace_is_reproducible_and_stream_keyed():
    cfg = load("rdwalk.pp")
    init = Configuration(1, {"x": 0, "n": 5})
    t1 = run_trace(cfg, init, Scheduler(), 500, seed=42, run_index=3)
    t2 = run_trace(cfg, init, Scheduler(), 500, seed=42, run_index=3)
    assert [(c.label, c.valuation) for c in t1] == [(c.label, c.valuation) for c in t2]
    t3 = run_trace(cfg, init, Scheduler(), 500, seed=42, run_index=4)
    assert [(c.label, c.valuation) for c in t1] != [(c.label, c.valuation) for c in t3]


def test_run_many_counts_and_censors():
    cfg = load("rdwalk.pp")
    init = Configuration(1, {"x": 0, "n": 10})
    stats = run_many(cfg, init, Scheduler(), 200, 5, seed=7)
    assert stats.runs == 200
    assert stats.terminated == 0  # budget 5 censors every run (needs >= 21 steps)
    assert stats.times.count(None) == 200 - stats.terminated
    full = run_many(cfg, init, Scheduler(), 200, 10_000, seed=7)
    assert full.terminated == 200
    assert all(v["x"] >= 10 for v in full.final_valuations)


def test_run_many_matches_stepwise_semantics():
    cfg = load("mini_roulette.pp")
    init = Configuration(1, {"x": 10, "y": 0})
    stats = run_many(cfg, init, Scheduler("uniform"), 50, 100_000, seed=3)
    for run in (0, 17, 49):
        trace = run_trace(cfg, init, Scheduler("uniform"), 100_000, seed=3,
                          run_index=run)
        steps = len(trace) - 1 if trace[-1].label == cfg.l_out else None
        assert stats.times[run] == steps
        if steps is not None:
            assert stats.final_valuations[run] == trace[-1].valuation


def test_schedulers():
    cfg = load("mini_roulette.pp")  # label 2 is the nondeterministic branch
    with pytest.raises(ValueError):
        Scheduler("bogus")
    init = Configuration(1, {"x": 3, "y": 0})
    for policy in ("then", "else", "uniform", "roundrobin"):
        stats = run_many(cfg, init, Scheduler(policy), 30, 50_000, seed=5)
        assert stats.terminated == 30, policy


def test_mean_hitting_time_matches_the_drift():
    # [DERIVED] drift +1/2 per iteration: from x = 0 to n = 5 takes ~10
    # iterations of 2 steps each, plus the final guard evaluation.
    cfg = load("rdwalk.pp")
    stats = run_many(cfg, Configuration(1, {"x": 0, "n": 5}), Scheduler(),
                     2000, 10_000, seed=9)
    mean = sum(stats.times) / 2000
    assert 18.0 < mean < 24.0


def test_wilson_interval_brackets_the_frequency():
    cfg = load("ber.pp")
    # short budget leaves a genuine mix of terminated and censored runs
    stats = run_many(cfg, Configuration(1, {"x": 0, "n": 3}), Scheduler(), 500,
                     13, seed=1)
    assert 0 < stats.terminated < 500
    lo, hi = stats.wilson_interval()
    assert lo <= float(stats.termination_frequency) <= hi
    assert 0.0 <= lo < hi <= 1.0


def test_trace_eta_compensated_process():
    cfg = load("ber.pp")
    dsm_text = "eps: 1\na: -4\nb: 4\nc: 0\neta 1: 4*n - 4*x\neta 2: 4*n - 4*x + 2\neta 3: -1\n"
    dsm = parse_dsm(dsm_text)
    trace = run_trace(cfg, Configuration(1, {"x": 0, "n": 2}), Scheduler(), 100,
                      seed=2)
    mt = trace_eta(cfg, dsm, trace)
    assert len(mt.xs) == len(trace)
    assert mt.ys[0] == mt.xs[0]
    assert mt.ys[3] == mt.xs[3] + 3
    bad = DSMMap({1: LinearExpr.var("x")}, F(1), F(-1), F(1), F(0))
    with pytest.raises(CoverageError):
        trace_eta(cfg, bad, trace)


def test_barrier_absorption_matches_enumeration():
    for yhat in (2, 4, 6, 8):
        assert barrier_absorption_prob(yhat) == barrier_hit_prob_enumerated(yhat)
    assert barrier_absorption_prob(2) == F(1, 2)
    assert barrier_absorption_prob(4) == F(5, 8)
    assert barrier_absorption_prob(6) == F(11, 16)
    with pytest.raises(DomainError):
        barrier_absorption_prob(3)
    with pytest.raises(DomainError):
        barrier_absorption_prob(0)


def test_stirling_constant_is_a_tight_upper_bound():
    import math

    import mpmath

    d = stirling_failure_constant(100)
    with mpmath.workprec(200):
        true = mpmath.e / (mpmath.pi * mpmath.sqrt(100))
        gap = mpmath.mpf(d.numerator) / d.denominator - true
        assert 0 < gap < mpmath.mpf(2) ** -79  # upper bound, off by < 2 ulp
    with pytest.raises(DomainError):
        stirling_failure_constant(99)


def test_nontermination_lower_bound_decreases_in_k():
    values = [nontermination_lower_bound(100, k) for k in (1, 5, 10)]
    assert values[0] > values[1] > values[2] > 0
    # the infinite product converges: adding far-out factors barely moves it
    # tail factors are 1 - d/2^i, so extending k changes little
    assert values[2] - nontermination_lower_bound(100, 40) < F(1, 1000)


def test_hoeffding_bound_properties():
    assert hoeffding_bound(10, F(-5), F(-1), F(1), F(1, 2)) == 1  # below threshold
    b = hoeffding_bound(10, F(3), F(-1), F(1), F(1, 2))
    # [DERIVED] exp(-2 * 8^2 / 40) = exp(-16/5) ~ 0.0408
    import math

    assert math.exp(-16 / 5) < float(b) < math.exp(-16 / 5) + 1e-12
    with pytest.raises(DomainError):
        hoeffding_bound(0, F(1), F(-1), F(1), F(1))
    with pytest.raises(DomainError):
        hoeffding_bound(5, F(1), F(1), F(1), F(1))
