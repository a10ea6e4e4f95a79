"""DSM-map synthesis: per-label affine templates, Farkas assertion
generation for conditions D1-D5, one joint LP, and extraction.

Normalizations: ε := 1 and c := 0 (the conditions are jointly positively
homogeneous and translation-invariant in η, so this loses no solutions) and
b >= a + 1 (closes the strict interval-length requirement; b may always
grow).  The LP additionally minimizes b − a for reproducible certificates —
feasibility alone is the acceptance bar.

Every Success result is re-validated with the independent checker before it
is returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cfg import CFG, Update
from .dsm import DSMMap, check_dsm, support_product
from .errors import UnsupportedFeatureError
from .linexpr import LinearExpr
from .ratlp import (
    Constraint,
    Feasible,
    Infeasible,
    LPProblem,
    Polyhedron,
    farkas_encode,
    region_intersect,
)
from .ratlp.simplex import lp_solve

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Template expressions: affine in program variables with coefficients that are
# themselves linear in the LP unknowns.


@dataclass(frozen=True)
class TExpr:
    coef: tuple[LinearExpr, ...]  # one per pvar, in pvar order
    const: LinearExpr

    def __sub__(self, other: "TExpr") -> "TExpr":
        return TExpr(
            tuple(c - d for c, d in zip(self.coef, other.coef)),
            self.const - other.const,
        )

    def scale(self, k: Fraction) -> "TExpr":
        return TExpr(tuple(c * k for c in self.coef), self.const * k)

    def add(self, other: "TExpr") -> "TExpr":
        return TExpr(
            tuple(c + d for c, d in zip(self.coef, other.coef)),
            self.const + other.const,
        )


def _alpha(label: int, pvar: str) -> str:
    return f"al_{label}_{pvar}"


def _beta(label: int) -> str:
    return f"be_{label}"


@dataclass
class Template:
    pvars: tuple[str, ...]
    labels: list[int]  # every label of the scoped loop, l_out included

    def eta(self, label: int) -> TExpr:
        return TExpr(
            tuple(LinearExpr.var(_alpha(label, v)) for v in self.pvars),
            LinearExpr.var(_beta(label)),
        )

    def variables(self) -> list[str]:
        out = []
        for lab in self.labels:
            out.extend(_alpha(lab, v) for v in self.pvars)
            out.append(_beta(lab))
        out.extend(["a", "b"])
        return out

    def post(self, label: int, upd: Update, rv_values: dict[str, Fraction]) -> TExpr:
        """η(label) composed with the update, sampled variables fixed (or set
        to expectations) via rv_values."""
        e = self.eta(label)
        if upd.is_identity():
            return e
        t_idx = self.pvars.index(upd.target)
        ct = e.coef[t_idx]
        rhs_const = upd.rhs.const
        coef = list(e.coef)
        coef[t_idx] = LinearExpr()
        for v, k in upd.rhs.coeffs.items():
            if v in rv_values:
                rhs_const += k * rv_values[v]
            else:
                i = self.pvars.index(v)
                coef[i] = coef[i] + ct * k
        return TExpr(tuple(coef), e.const + ct * rhs_const)


@dataclass
class Success:
    dsm: DSMMap


@dataclass
class Fail:
    reason: str  # 'LP-infeasible' | 'empty-invariant-everywhere' | 'unsupported-feature'


SynthesisOutcome = Union[Success, Fail]


# ---------------------------------------------------------------------------
# Assertion assembly.


def _nonempty(polys) -> list[tuple[int, Polyhedron]]:
    out = []
    for idx, poly in enumerate(polys):
        if poly.is_empty():
            log.info("pruning empty invariant disjunct %d", idx)
            continue
        out.append((idx, poly))
    return out


VAR_A = LinearExpr.var("a")
VAR_B = LinearExpr.var("b")
EPS = Fraction(1)


class _Assembler:
    def __init__(self, template: Template):
        self.template = template
        self.constraints: list[Constraint] = []
        self.xi_names: list[str] = []
        self.counter = 0

    def include(self, poly: Polyhedron, diff: TExpr, d: LinearExpr):
        """Assert: for all x in poly, diff(x) <= d  (diff's constant moves to d)."""
        cvec = list(diff.coef)
        xi, cons = farkas_encode(poly, cvec, d - diff.const, prefix=f"xi{self.counter}")
        self.counter += 1
        self.xi_names.extend(xi)
        self.constraints.extend(cons)

    def bounded(self, polys, diff: TExpr):
        """a <= diff <= b on every nonempty disjunct."""
        for _, poly in polys:
            self.include(poly, diff, VAR_B)
            self.include(poly, diff.scale(-1), -VAR_A)

    def decreasing(self, polys, diff: TExpr):
        """diff <= -eps on every nonempty disjunct."""
        for _, poly in polys:
            self.include(poly, diff, LinearExpr.const_expr(-EPS))


def assemble_lp(template: Template, loop: CFG, inv, dists) -> LPProblem:
    asm = _Assembler(template)
    tpl = template

    for label in sorted(loop.labels):
        kind = loop.labels[label]
        region = _nonempty(inv.at(label))
        ts = loop.out(label)
        if kind == "assign":
            (t,) = ts
            if not t.update.is_identity() and t.update.rhs.variables() - set(
                loop.pvars
            ) - set(dists):
                raise UnsupportedFeatureError(
                    f"unknown variables in update at label {label}"
                )
            eta_src = tpl.eta(label)
            for mu in support_product(t.update, dists):
                post = tpl.post(t.target, t.update, {r: Fraction(v) for r, v in mu.items()})
                asm.bounded(region, post - eta_src)
            evals = {
                r: dists[r].expectation()
                for r in (t.update.rhs.variables() & set(dists) if not t.update.is_identity() else set())
            }
            epost = tpl.post(t.target, t.update, evals)
            asm.decreasing(region, epost - eta_src)
        elif kind == "branch":
            for t in ts:
                dom = _nonempty(region_intersect(inv.at(label), t.region))
                diff = tpl.eta(t.target) - tpl.eta(label)
                asm.bounded(dom, diff)
                asm.decreasing(dom, diff)
        elif kind == "nondet":
            for t in ts:
                diff = tpl.eta(t.target) - tpl.eta(label)
                asm.bounded(region, diff)
                asm.decreasing(region, diff)
        elif kind == "prob":
            mix = TExpr(
                tuple(LinearExpr() for _ in tpl.pvars), LinearExpr()
            )
            for t in ts:
                diff = tpl.eta(t.target) - tpl.eta(label)
                asm.bounded(region, diff)
                mix = mix.add(tpl.eta(t.target).scale(t.prob))
            asm.decreasing(region, mix - tpl.eta(label))

    # D5 at the loop head, conjoined with the guard (c = 0).
    head = loop.out(loop.l_in)
    guard_t = next(
        (t for t in head if t.kind == "guard" and t.target != loop.l_out), None
    )
    dom = inv.at(loop.l_in)
    if guard_t is not None:
        dom = region_intersect(dom, guard_t.region)
    for _, poly in _nonempty(dom):
        asm.include(poly, tpl.eta(loop.l_in).scale(-1), LinearExpr.const_expr(0))

    # interval nondegeneracy: a - b <= -1
    asm.constraints.append(
        Constraint({"a": Fraction(1), "b": Fraction(-1)}, "<=", Fraction(-1))
    )

    variables = tpl.variables() + asm.xi_names
    return LPProblem(
        variables=variables,
        constraints=asm.constraints,
        nonneg=set(asm.xi_names),
        objective=("min", {"b": Fraction(1), "a": Fraction(-1)}),
    )


def make_template(loop: CFG) -> Template:
    return Template(loop.pvars, loop.all_labels())


def synthesize_dsm(loop: CFG, inv, dists) -> SynthesisOutcome:
    from .ratlp import region_is_empty

    if region_is_empty(inv.at(loop.l_in)):
        return Fail("empty-invariant-everywhere")
    template = make_template(loop)
    try:
        lp = assemble_lp(template, loop, inv, dists)
    except UnsupportedFeatureError:
        return Fail("unsupported-feature")
    res = lp_solve(lp)
    if isinstance(res, Infeasible):
        return Fail("LP-infeasible")
    assert isinstance(res, Feasible)
    asg = res.assignment
    eta = {
        lab: LinearExpr(
            {v: asg[_alpha(lab, v)] for v in loop.pvars}, asg[_beta(lab)]
        )
        for lab in template.labels
    }
    dsm = DSMMap(eta, EPS, asg["a"], asg["b"], Fraction(0))
    report = check_dsm(dsm, loop, inv, dists)
    if not report.verdict:
        raise AssertionError(
            "internal error: synthesized map failed the independent checker: "
            + "; ".join(v.detail for v in report.violations)
        )
    return Success(dsm)
