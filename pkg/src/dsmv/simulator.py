"""MDP execution of programs: Monte-Carlo runs, martingale traces, and the
closed-form random-walk / concentration mathematics.

Sampling is exact: each step draws one integer uniform in [0, D) per sampled
variable (D = the common denominator of the distribution) and compares it
against cumulative numerators, so empirical frequencies are exactly the
declared rationals in distribution.  Runs use counter-based Philox substreams
keyed by (seed, run index), making results independent of execution order.
Runs that exhaust the step budget are censored, never counted as terminated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np

from .cfg import CFG
from .dsm import DSMMap
from .errors import CoverageError, DomainError
from .frontend import eval_pred


@dataclass(frozen=True)
class Configuration:
    label: int
    valuation: dict

    def __post_init__(self):
        object.__setattr__(self, "valuation", dict(self.valuation))


class Scheduler:
    """Resolves nondeterministic branches.

    Policies: 'then', 'else', 'uniform' (fair coin from the run's RNG),
    'roundrobin' (alternates per nondeterministic decision within a run)."""

    def __init__(self, policy: str = "then"):
        if policy not in ("then", "else", "uniform", "roundrobin"):
            raise ValueError(f"unknown scheduler policy {policy!r}")
        self.policy = policy
        self._counter = 0

    def reset(self):
        self._counter = 0

    def choose(self, rng) -> int:
        """0 = then-branch, 1 = else-branch."""
        if self.policy == "then":
            return 0
        if self.policy == "else":
            return 1
        if self.policy == "uniform":
            return int(rng.draw(2))
        choice = self._counter % 2
        self._counter += 1
        return choice


@dataclass
class RunStats:
    runs: int
    terminated: int
    budget: int
    times: list[Optional[int]]  # steps to the terminal label; None = censored
    final_valuations: list[dict]
    outer_arrivals: Optional[list[list[int]]] = None

    @property
    def termination_frequency(self) -> Fraction:
        return Fraction(self.terminated, self.runs) if self.runs else Fraction(0)

    def wilson_interval(self, z: float = 3.0) -> tuple[float, float]:
        n = self.runs
        if n == 0:
            return (0.0, 1.0)
        p = self.terminated / n
        denom = 1 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class MartingaleTrace:
    xs: list[Fraction]
    ys: list[Fraction]  # Y_n = X_n + n * eps
    epsilon: Fraction


# ---------------------------------------------------------------------------
# Exact sampling machinery.


class _RunRNG:
    """Buffered uniform-integer draws from a per-run Philox substream."""

    def __init__(self, seed: int, run_index: int):
        self.gen = np.random.Generator(np.random.Philox(key=[seed, run_index]))
        self._buffers: dict[int, list[int]] = {}

    def draw(self, bound: int) -> int:
        buf = self._buffers.get(bound)
        if not buf:
            buf = self.gen.integers(0, bound, size=48).tolist()
            self._buffers[bound] = buf
        return buf.pop()


class _DistSampler:
    def __init__(self, dist):
        denom = math.lcm(*(p.denominator for _, p in dist.support))
        self.denom = denom
        self.values = []
        self.cumulative = []
        acc = 0
        for v, p in dist.support:
            acc += p.numerator * (denom // p.denominator)
            self.values.append(v)
            self.cumulative.append(acc)

    def sample(self, rng: _RunRNG) -> int:
        u = rng.draw(self.denom)
        for v, cum in zip(self.values, self.cumulative):
            if u < cum:
                return v
        return self.values[-1]


def _samplers(cfg: CFG) -> dict[str, _DistSampler]:
    return {name: _DistSampler(d) for name, d in cfg.dists.items()}


# ---------------------------------------------------------------------------
# Single-step and trace execution.


def step(cfg: CFG, conf: Configuration, sched: Scheduler, rng) -> Configuration:
    """One MDP step; the terminal label self-loops.

    ``rng`` must provide ``draw(bound) -> int`` uniform in [0, bound);
    a fresh sample μ for the sampling variables is drawn on every step."""
    label = conf.label
    if label == cfg.l_out or label not in cfg.labels:
        return conf
    kind = cfg.labels[label]
    ts = cfg.out(label)
    val = conf.valuation
    if kind == "assign":
        (t,) = ts
        new = dict(val)
        if not t.update.is_identity():
            rvs = sorted(t.update.rhs.variables() & set(cfg.dists))
            scope = dict(val)
            for name in rvs:
                scope[name] = _DistSampler(cfg.dists[name]).sample(rng)
            result = t.update.rhs.evaluate(scope)
            assert result.denominator == 1, "integer programs only"
            new[t.update.target] = int(result)
        return Configuration(t.target, new)
    if kind == "branch":
        t = ts[0] if eval_pred(ts[0].pred, val) else ts[1]
        return Configuration(t.target, val)
    if kind == "prob":
        t0 = ts[0]
        u = rng.draw(t0.prob.denominator)
        chosen = t0 if u < t0.prob.numerator else ts[1]
        return Configuration(chosen.target, val)
    # nondet
    t = ts[sched.choose(rng)]
    return Configuration(t.target, val)


def run_trace(
    cfg: CFG, init: Configuration, sched: Scheduler, budget: int, seed: int,
    run_index: int = 0,
) -> list[Configuration]:
    rng = _RunRNG(seed, run_index)
    sched.reset()
    trace = [init]
    conf = init
    for _ in range(budget):
        if conf.label == cfg.l_out:
            break
        conf = step(cfg, conf, sched, rng)
        trace.append(conf)
    return trace


# ---------------------------------------------------------------------------
# Monte-Carlo batches.


def _compile_pred(pred, _num=lambda x: int(x) if x.denominator == 1 else x):
    """Compile a predicate into a closure over an int valuation dict."""
    from .frontend import PAnd, PAtom, PBool, PNot, POr

    if isinstance(pred, PBool):
        value = pred.value
        return lambda val: value
    if isinstance(pred, PAtom):
        diff = pred.lhs - pred.rhs
        items = tuple((v, _num(c)) for v, c in diff.coeffs.items())
        const = _num(diff.const)
        op = pred.op
        if op == "<":
            cmp = lambda s: s < 0
        elif op == "<=":
            cmp = lambda s: s <= 0
        elif op == ">":
            cmp = lambda s: s > 0
        elif op == ">=":
            cmp = lambda s: s >= 0
        else:
            cmp = lambda s: s == 0

        def atom(val, items=items, const=const, cmp=cmp):
            s = const
            for v, c in items:
                s += c * val[v]
            return cmp(s)

        return atom
    if isinstance(pred, PNot):
        sub = _compile_pred(pred.arg)
        return lambda val: not sub(val)
    if isinstance(pred, PAnd):
        subs = tuple(_compile_pred(q) for q in pred.args)
        return lambda val: all(f(val) for f in subs)
    if isinstance(pred, POr):
        subs = tuple(_compile_pred(q) for q in pred.args)
        return lambda val: any(f(val) for f in subs)
    raise TypeError(pred)


def _compile_actions(cfg: CFG, samplers, sched: Scheduler):
    """Per-label closures val, rng -> next label, for the Monte-Carlo loop."""

    def num(x):
        return int(x) if x.denominator == 1 else x

    compiled = {}
    for lab, kind in cfg.labels.items():
        ts = cfg.out(lab)
        if kind == "assign":
            (t,) = ts
            if t.update.is_identity():
                compiled[lab] = lambda val, rng, _t=t.target: _t
            else:
                rhs = t.update.rhs
                pv = tuple(
                    (v, num(c)) for v, c in rhs.coeffs.items() if v not in samplers
                )
                rv = tuple(
                    (samplers[v], num(rhs.coeffs[v]))
                    for v in sorted(rhs.coeffs) if v in samplers
                )
                const = num(rhs.const)

                def assign(val, rng, _t=t.target, _var=t.update.target,
                           _pv=pv, _rv=rv, _c=const):
                    acc = _c
                    for v, c in _pv:
                        acc += c * val[v]
                    for s, c in _rv:
                        acc += c * s.sample(rng)
                    val[_var] = int(acc)
                    return _t

                compiled[lab] = assign
        elif kind == "branch":
            pred_fn = _compile_pred(ts[0].pred)
            compiled[lab] = (
                lambda val, rng, _p=pred_fn, _a=ts[0].target, _b=ts[1].target:
                _a if _p(val) else _b
            )
        elif kind == "prob":
            p = ts[0].prob
            compiled[lab] = (
                lambda val, rng, _d=p.denominator, _n=p.numerator,
                _a=ts[0].target, _b=ts[1].target:
                _a if rng.draw(_d) < _n else _b
            )
        else:
            compiled[lab] = (
                lambda val, rng, _a=ts[0].target, _b=ts[1].target:
                _a if sched.choose(rng) == 0 else _b
            )
    return compiled


def run_many(
    cfg: CFG,
    init: Configuration,
    sched: Scheduler,
    n: int,
    budget: int,
    seed: int,
    collect_arrivals: bool = False,
) -> RunStats:
    samplers = _samplers(cfg)
    l_out = cfg.l_out
    compiled = _compile_actions(cfg, samplers, sched)

    times: list[Optional[int]] = []
    finals: list[dict] = []
    arrivals_all: Optional[list[list[int]]] = [] if collect_arrivals else None
    terminated = 0
    l_in_mark = cfg.l_in

    for run in range(n):
        rng = _RunRNG(seed, run)
        sched.reset()
        val = dict(init.valuation)
        label = init.label
        t_stop: Optional[int] = None
        arrivals: list[int] = []
        for stepno in range(1, budget + 1):
            label = compiled[label](val, rng)
            if collect_arrivals and label == l_in_mark:
                arrivals.append(stepno)
            if label == l_out:
                t_stop = stepno
                break
        if t_stop is not None:
            terminated += 1
        times.append(t_stop)
        finals.append(dict(val))
        if collect_arrivals:
            arrivals_all.append(arrivals)

    return RunStats(
        runs=n, terminated=terminated, budget=budget, times=times,
        final_valuations=finals, outer_arrivals=arrivals_all,
    )


# ---------------------------------------------------------------------------
# Martingale traces.


def trace_eta(cfg: CFG, dsm: DSMMap, trace: list[Configuration]) -> MartingaleTrace:
    xs = []
    for conf in trace:
        if conf.label not in dsm.eta:
            raise CoverageError(f"DSM-map has no entry for label {conf.label}")
        xs.append(dsm.eta[conf.label].evaluate(conf.valuation))
    ys = [x + n * dsm.epsilon for n, x in enumerate(xs)]
    return MartingaleTrace(xs, ys, dsm.epsilon)


# ---------------------------------------------------------------------------
# Closed-form counterexample mathematics.


def barrier_absorption_prob(yhat: int) -> Fraction:
    """P(the symmetric ±1 walk from 1 hits the barrier 2 within yhat steps),
    closed form 1 - 2^-yhat * C(yhat, yhat/2), valid for even yhat >= 2."""
    if yhat <= 0 or yhat % 2 != 0:
        raise DomainError(f"need a positive even step count, got {yhat}")
    return 1 - Fraction(math.comb(yhat, yhat // 2), 2 ** yhat)


_GRID = 1 << 80


def _round_up(x: "mpmath.mpf") -> Fraction:
    """Conservative ceiling on a 2^-80 grid plus one ulp of slack."""
    return Fraction(int(mpmath.floor(x * _GRID)) + 1, _GRID)


def stirling_failure_constant(y0: int) -> Fraction:
    """d = e / (pi * sqrt(y0)), rounded up so downstream bounds stay bounds."""
    if y0 <= 0 or y0 % 2 != 0:
        raise DomainError(f"need a positive even initial value, got {y0}")
    with mpmath.workprec(120):
        d = mpmath.e / (mpmath.pi * mpmath.sqrt(y0))
        return _round_up(d)


def nontermination_lower_bound(y0: int, k: int) -> Fraction:
    """Lower bound prod_{i<k} (1 - d/2^i) on surviving k outer iterations of
    the doubling-walk counterexample, with d rounded up (conservative)."""
    d = stirling_failure_constant(y0)
    if d >= 1:
        raise DomainError(f"failure constant d = {d} >= 1; no useful bound")
    out = Fraction(1)
    for i in range(k):
        out *= 1 - d / 2**i
    return out


def hoeffding_bound(n: int, lam: Fraction, a: Fraction, b: Fraction,
                    eps: Fraction) -> Fraction:
    """Upper bound on P(X_n - X_0 >= lam) for a difference-bounded
    supermartingale with per-step drift <= -eps: exp(-2(lam+n*eps)^2/(n(b-a)^2)),
    rounded upward; returns 1 below the threshold lam + n*eps > 0."""
    lam, a, b, eps = Fraction(lam), Fraction(a), Fraction(b), Fraction(eps)
    if b <= a:
        raise DomainError("need b > a")
    if n <= 0:
        raise DomainError("need n >= 1")
    shift = lam + n * eps
    if shift <= 0:
        return Fraction(1)
    exponent = Fraction(2) * shift * shift / (n * (b - a) ** 2)
    with mpmath.workprec(120):
        value = mpmath.exp(-mpmath.mpf(exponent.numerator) / exponent.denominator)
        return min(Fraction(1), _round_up(value))
