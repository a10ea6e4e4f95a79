"""Checker for hand-written termination derivations (Hoare-style rules 1-11).

File format (.drv)::

    dist r = {-1: 3/4, 1: 1/4};
    params eps: 1, a: -100, b: 100, c: 0

    step i rule 3 angle
    prog: y := y + r
    pre: 6*y
    post: 6*y + 2

    step iv rule 1 curly uses iii
    prog: while y >= 0 do y := y + r; x := x + r od
    pre: 6*y + 1
    post: 6*y

Step kinds: ``curly`` ({R}P{R'}, certifies a full DSM including the
loop-head lower bound), ``angle`` (partial DSM, no lower bound), ``tm``
(termination assertion, no pre/post).  A step may override the file-level
parameters with a ``with eps: ..., a: ..., b: ..., c: ...`` line.

Side conditions under a predicate are discharged per DNF disjunct as exact
polyhedron-in-halfspace inclusions; unpredicated ones must hold over all
valuations, which for affine expressions means the difference is a constant
within the stated bounds.  Program fragments are compared structurally with
labels ignored and sequencing flattened.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .cfg import Update
from .dsm import expected_post
from .errors import MalformedDerivationError, ProgramSyntaxError
from .frontend import (
    Assign,
    IfGuard,
    IfProb,
    IfStar,
    Pred,
    Seq,
    Skip,
    Stmt,
    While,
    _Parser,
    pred_not,
    pred_variables,
    tokenize,
)
from .linexpr import LinearExpr
from .ratlp import pred_to_union


@dataclass
class Step:
    name: str
    rule: int
    kind: str  # 'curly' | 'angle' | 'tm'
    premises: list[str]
    fragment: Stmt
    pre: Optional[LinearExpr]
    post: Optional[LinearExpr]
    params: dict[str, Fraction]  # eps, a, b, c


@dataclass
class Derivation:
    dists: dict
    steps: list[Step]

    def step(self, name: str) -> Step:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class DerivationReport:
    valid: bool
    failures: list[tuple[str, int, str]] = field(default_factory=list)
    effective_params: dict[str, Fraction] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Parsing.


def _parse_params(text: str, base: dict[str, Fraction]) -> dict[str, Fraction]:
    out = dict(base)
    for item in text.split(","):
        key, _, value = item.partition(":")
        key = key.strip()
        if key not in ("eps", "a", "b", "c"):
            raise MalformedDerivationError(f"unknown parameter {key!r}")
        out[key] = Fraction(value.strip())
    return out


def _parse_fragment(text: str) -> Stmt:
    parser = _Parser(tokenize(text))
    stmt = parser.parse_stmt()
    parser.expect("eof")
    return stmt


def _parse_expr(text: str) -> LinearExpr:
    parser = _Parser(tokenize(text))
    e = parser.parse_expr()
    parser.expect("eof")
    return e


def parse_derivation(text: str) -> Derivation:
    dists: dict = {}
    default_params: dict[str, Fraction] = {}
    steps: list[Step] = []
    current: Optional[dict] = None

    def flush():
        nonlocal current
        if current is None:
            return
        if current["kind"] != "tm" and (
            current["pre"] is None or current["post"] is None
        ):
            raise MalformedDerivationError(
                f"step {current['name']}: curly/angle steps need pre and post"
            )
        if current["frag"] is None:
            raise MalformedDerivationError(f"step {current['name']}: missing prog")
        steps.append(
            Step(
                name=current["name"],
                rule=current["rule"],
                kind=current["kind"],
                premises=current["uses"],
                fragment=_parse_fragment(current["frag"]),
                pre=_parse_expr(current["pre"]) if current["pre"] else None,
                post=_parse_expr(current["post"]) if current["post"] else None,
                params=current["params"],
            )
        )
        current = None

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("dist "):
            p = _Parser(tokenize(line))
            dists.update(p.parse_dists())
            continue
        if line.startswith("params "):
            default_params = _parse_params(line[len("params "):], {})
            continue
        if line.startswith("step "):
            flush()
            words = line.split()
            # step NAME rule N KIND [uses P1 P2 ...]
            try:
                name = words[1]
                assert words[2] == "rule"
                rule = int(words[3])
                kind = words[4]
                uses = []
                if len(words) > 5:
                    assert words[5] == "uses"
                    uses = [w.rstrip(",") for w in words[6:]]
            except (AssertionError, IndexError, ValueError) as exc:
                raise MalformedDerivationError(f"bad step header: {line!r}") from exc
            if kind not in ("curly", "angle", "tm"):
                raise MalformedDerivationError(f"bad step kind {kind!r}")
            current = {
                "name": name, "rule": rule, "kind": kind, "uses": uses,
                "frag": None, "pre": None, "post": None,
                "params": dict(default_params),
            }
            continue
        if current is None:
            raise MalformedDerivationError(f"content outside a step: {line!r}")
        if line.startswith("with "):
            current["params"] = _parse_params(line[len("with "):],
                                              current["params"])
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        if key == "prog":
            current["frag"] = value.strip()
        elif key == "pre":
            current["pre"] = value.strip()
        elif key == "post":
            current["post"] = value.strip()
        else:
            raise MalformedDerivationError(f"unrecognized line {line!r}")
    flush()

    seen: set[str] = set()
    for s in steps:
        for p in s.premises:
            if p not in seen:
                raise MalformedDerivationError(
                    f"step {s.name}: dangling premise reference {p!r}"
                )
        seen.add(s.name)
    for key in ("eps", "a", "b", "c"):
        for s in steps:
            if key not in s.params:
                raise MalformedDerivationError(
                    f"step {s.name}: parameter {key!r} not set"
                )
    return Derivation(dists, steps)


# ---------------------------------------------------------------------------
# Structural fragment comparison (labels ignored, Seq flattened).


def _expr_fp(e: LinearExpr):
    return (tuple(sorted(e.coeffs.items())), e.const)


def _pred_fp(p: Pred):
    from .frontend import PAnd, PAtom, PBool, PNot, POr

    if isinstance(p, PBool):
        return ("bool", p.value)
    if isinstance(p, PAtom):
        return ("atom", _expr_fp(p.lhs), p.op, _expr_fp(p.rhs))
    if isinstance(p, PNot):
        return ("not", _pred_fp(p.arg))
    if isinstance(p, PAnd):
        return ("and", tuple(_pred_fp(q) for q in p.args))
    return ("or", tuple(_pred_fp(q) for q in p.args))


def flatten(s: Stmt) -> list:
    if isinstance(s, Seq):
        return flatten(s.first) + flatten(s.second)
    return [fingerprint(s)]


def fingerprint(s: Stmt):
    if isinstance(s, Skip):
        return ("skip",)
    if isinstance(s, Assign):
        return ("assign", s.var, _expr_fp(s.expr))
    if isinstance(s, Seq):
        return ("seq", tuple(flatten(s)))
    if isinstance(s, IfGuard):
        return ("ifg", _pred_fp(s.guard), fingerprint(s.then), fingerprint(s.els))
    if isinstance(s, IfStar):
        return ("ifs", fingerprint(s.then), fingerprint(s.els))
    if isinstance(s, IfProb):
        return ("ifp", s.p, fingerprint(s.then), fingerprint(s.els))
    if isinstance(s, While):
        return ("while", _pred_fp(s.guard), fingerprint(s.body))
    raise TypeError(s)


def same_fragment(s1: Stmt, s2: Stmt) -> bool:
    return flatten(s1) == flatten(s2)


# ---------------------------------------------------------------------------
# Side-condition discharge.


def _const_in(e: LinearExpr, lo: Fraction, hi: Fraction) -> Optional[str]:
    """Must hold over all valuations: affine => constant within [lo, hi]."""
    if not e.is_constant():
        return f"difference {e.render()} is not valuation-independent"
    if not lo <= e.const <= hi:
        return f"difference {e.const} outside [{lo}, {hi}]"
    return None


def _implied_in(
    pred: Pred, e: LinearExpr, lo: Optional[Fraction], hi: Fraction
) -> Optional[str]:
    """pred -> lo <= e <= hi, per DNF disjunct (empty disjuncts are vacuous)."""
    varnames = tuple(sorted(pred_variables(pred) | e.variables()))
    for poly in pred_to_union(pred, varnames):
        status, value, _ = poly.maximize(e)
        if status == "infeasible":
            continue
        if status == "unbounded":
            return f"{e.render()} unbounded above under the predicate"
        if value > hi:
            return f"{e.render()} reaches {value} > {hi} under the predicate"
        if lo is not None:
            status, value, _ = poly.maximize(-e)
            if status == "unbounded":
                return f"{e.render()} unbounded below under the predicate"
            if -value < lo:
                return f"{e.render()} reaches {-value} < {lo} under the predicate"
    return None


# ---------------------------------------------------------------------------
# Per-rule validation.  Each returns an error string or None.


def _check_rule(deriv: Derivation, s: Step) -> Optional[str]:
    eps, a, b, c = (s.params[k] for k in ("eps", "a", "b", "c"))
    prems = [deriv.step(p) for p in s.premises]

    def triple_kinds_ok(expected: str) -> Optional[str]:
        for p in prems:
            if p.kind != expected:
                return f"premise {p.name} has kind {p.kind}, expected {expected}"
        return None

    if s.rule == 1:
        if s.kind not in ("curly", "angle"):
            return "while rule concludes a Hoare triple"
        if len(prems) != 1 or prems[0].kind != "angle":
            return "expects exactly one angle-triple premise"
        if not isinstance(s.fragment, While):
            return "conclusion fragment must be a while loop"
        prem = prems[0]
        if not same_fragment(prem.fragment, s.fragment.body):
            return "premise fragment is not the loop body"
        if s.pre != prem.post:
            return "conclusion precondition must equal the premise postcondition"
        g = s.fragment.guard
        err = _implied_in(g, prem.pre - prem.post, a, -eps)
        if err:
            return f"guard-side descent fails: {err}"
        err = _implied_in(pred_not(g), s.post - prem.post, a, -eps)
        if err:
            return f"exit-side descent fails: {err}"
        if s.kind == "curly":
            err = _implied_in(g, -prem.post, None, -c)
            if err:
                return f"loop-head lower bound (>= {c}) fails: {err}"
        return None

    if s.rule == 2:
        if prems or not isinstance(s.fragment, Skip):
            return "skip axiom takes no premises and a skip fragment"
        return _const_in(s.post - s.pre, a, -eps)

    if s.rule == 3:
        if prems or not isinstance(s.fragment, Assign):
            return "assignment axiom takes no premises and an assignment fragment"
        upd = Update(s.fragment.var, s.fragment.expr)
        e = expected_post(s.post, upd, deriv.dists) - s.pre
        err = _const_in(e, a, -eps)
        if err:
            return f"expected-value descent fails: {err}"
        return None

    if s.rule == 4:
        if len(prems) != 2:
            return "sequential composition takes two premises"
        err = triple_kinds_ok(s.kind)
        if err:
            return err
        p1, p2 = prems
        if p1.post != p2.pre:
            return "premise postcondition/precondition mismatch"
        if s.pre != p1.pre or s.post != p2.post:
            return "conclusion pre/post must chain the premises"
        if flatten(s.fragment) != flatten(p1.fragment) + flatten(p2.fragment):
            return "conclusion fragment is not the premises in sequence"
        return None

    if s.rule in (5, 6, 7):
        if len(prems) != 2:
            return "branch rules take two premises"
        err = triple_kinds_ok(s.kind)
        if err:
            return err
        p1, p2 = prems
        frag = s.fragment
        expected_type = {5: IfGuard, 6: IfStar, 7: IfProb}[s.rule]
        if not isinstance(frag, expected_type):
            return f"conclusion fragment must be {expected_type.__name__}"
        if not same_fragment(p1.fragment, frag.then) or not same_fragment(
            p2.fragment, frag.els
        ):
            return "premise fragments must be the two branches"
        if p1.post != s.post or p2.post != s.post:
            return "branch postconditions must agree with the conclusion"
        r = s.pre
        if s.rule == 5:
            err = _implied_in(frag.guard, p1.pre - r, a, -eps)
            if err:
                return f"then-branch descent fails: {err}"
            err = _implied_in(pred_not(frag.guard), p2.pre - r, a, -eps)
            if err:
                return f"else-branch descent fails: {err}"
            return None
        if s.rule == 6:
            for p in (p1, p2):
                err = _const_in(p.pre - r, a, -eps)
                if err:
                    return f"branch descent fails for {p.name}: {err}"
            return None
        # rule 7
        for p in (p1, p2):
            err = _const_in(p.pre - r, a, b)
            if err:
                return f"branch difference bound fails for {p.name}: {err}"
        mix = p1.pre * frag.p + p2.pre * (1 - frag.p) - r
        if not mix.is_constant():
            return "probabilistic mixture is not valuation-independent"
        if mix.const > -eps:
            return f"probabilistic descent fails: mixture difference {mix.const} > {-eps}"
        return None

    if s.rule == 8:
        if s.kind != "tm":
            return "termination rule concludes Tm(...)"
        if not isinstance(s.fragment, While):
            return "conclusion fragment must be a while loop"
        if len(prems) != 2:
            return "takes Tm(body) and a curly triple for the loop"
        tm = next((p for p in prems if p.kind == "tm"), None)
        tri = next((p for p in prems if p.kind == "curly"), None)
        if tm is None or tri is None:
            return "takes one Tm premise and one curly-triple premise"
        if not same_fragment(tm.fragment, s.fragment.body):
            return "Tm premise must cover the loop body"
        if not same_fragment(tri.fragment, s.fragment):
            return "curly-triple premise must be about this very loop"
        return None

    if s.rule == 9:
        if s.kind != "tm" or prems:
            return "axiom concludes Tm with no premises"
        if not isinstance(s.fragment, (Assign, Skip)):
            return "axiom applies to assignments and skip only"
        return None

    if s.rule == 10:
        if s.kind != "tm" or len(prems) != 2:
            return "takes two Tm premises"
        err = triple_kinds_ok("tm")
        if err:
            return err
        if flatten(s.fragment) != flatten(prems[0].fragment) + flatten(
            prems[1].fragment
        ):
            return "conclusion fragment is not the premises in sequence"
        return None

    if s.rule == 11:
        if s.kind != "tm" or len(prems) != 2:
            return "takes two Tm premises"
        err = triple_kinds_ok("tm")
        if err:
            return err
        frag = s.fragment
        if not isinstance(frag, (IfGuard, IfStar, IfProb)):
            return "conclusion fragment must be a branch"
        if not same_fragment(prems[0].fragment, frag.then) or not same_fragment(
            prems[1].fragment, frag.els
        ):
            return "premise fragments must be the two branches"
        return None

    return f"unknown rule ({s.rule})"


def check_derivation(deriv: Derivation) -> DerivationReport:
    failures: list[tuple[str, int, str]] = []
    for s in deriv.steps:
        err = _check_rule(deriv, s)
        if err:
            failures.append((s.name, s.rule, err))
    eff: dict[str, Fraction] = {}
    if deriv.steps:
        eff = {
            "eps": min(s.params["eps"] for s in deriv.steps),
            "a": min(s.params["a"] for s in deriv.steps),
            "b": max(s.params["b"] for s in deriv.steps),
            "c": min(s.params["c"] for s in deriv.steps),
        }
    return DerivationReport(valid=not failures, failures=failures,
                            effective_params=eff)
