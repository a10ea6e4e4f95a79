"""Descent supermartingale maps (DSM-maps) and their exact checker.

A DSM-map assigns an affine η(ℓ, ·) to every label of a scoped loop
(including its exit label) plus parameters ε > 0, a <= b, c, subject to:

  D1 (assignment ℓ -> ℓ′): for every sampled μ,
        a <= η(ℓ′, u(ν, μ)) − η(ℓ, ν) <= b        on ν ∈ I(ℓ),
     and E_μ[η(ℓ′, u(ν, μ))] <= η(ℓ, ν) − ε       on ν ∈ I(ℓ);
  D2 (branch edge with predicate φ): a <= η(ℓ′, ν) − η(ℓ, ν) <= min{−ε, b}
     on ν ∈ I(ℓ) ∧ φ;
  D3 (nondeterministic edge): the D2 bound on all of I(ℓ);
  D4 (probabilistic ℓ with p/1−p edges): both differences within [a, b], and
     p·η(ℓ′) + (1−p)·η(ℓ″) <= η(ℓ) − ε, on I(ℓ);
  D5: η(ℓ_in, ν) >= c on I(ℓ_in) ∧ G.

The checker discharges each condition per invariant disjunct as a
polyhedron-in-halfspace inclusion with exact LP, reports every violation
(sorted by label then condition), and never uses floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Optional

from .cfg import CFG, Transition, Update
from .errors import CoverageError, ProgramSyntaxError, UnboundedSupportError
from .frontend import parse_linear_expr
from .linexpr import LinearExpr
from .ratlp import Region, region_intersect


@dataclass
class DSMMap:
    eta: dict[int, LinearExpr]
    epsilon: Fraction
    a: Fraction
    b: Fraction
    c: Fraction

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.b < self.a:
            raise ValueError("[a, b] must be a nonempty interval")

    def scaled(self, lam: Fraction) -> "DSMMap":
        lam = Fraction(lam)
        return DSMMap(
            {lab: e * lam for lab, e in self.eta.items()},
            self.epsilon * lam, self.a * lam, self.b * lam, self.c * lam,
        )


@dataclass(frozen=True)
class Violation:
    condition: str  # 'D1'..'D5'
    label: int
    transition: str
    detail: str
    witness: Optional[dict] = None

    def sort_key(self):
        return (self.label, self.condition, self.transition, self.detail)


@dataclass
class CheckReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# Expected / per-sample post expressions.


def _rvars_of(upd: Update, dists) -> list[str]:
    if upd.is_identity():
        return []
    return sorted(upd.rhs.variables() & set(dists))


def expected_post(eta_target: LinearExpr, upd: Update, dists) -> LinearExpr:
    """E_μ[η(ℓ′, u(ν, μ))] as an affine expression over program variables."""
    if upd.is_identity():
        return eta_target
    e = eta_target.substitute(upd.target, upd.rhs)
    for r in sorted(e.variables()):
        if r in dists:
            dist = dists[r]
            if not dist.support:
                raise UnboundedSupportError(f"distribution for {r!r} has no support")
            e = e.substitute(r, LinearExpr.const_expr(dist.expectation()))
    return e


def post_for_sample(eta_target: LinearExpr, upd: Update, mu: dict[str, int]) -> LinearExpr:
    if upd.is_identity():
        return eta_target
    rhs = upd.rhs
    for r, v in mu.items():
        rhs = rhs.substitute(r, LinearExpr.const_expr(v))
    return eta_target.substitute(upd.target, rhs)


def support_product(upd: Update, dists):
    """Yield valuations of the sampled variables occurring in the update."""
    rvars = _rvars_of(upd, dists)
    supports = [dists[r].support for r in rvars]
    for combo in product(*supports):
        yield {r: v for r, (v, _) in zip(rvars, combo)}


def extreme_post_diffs(
    eta_src: LinearExpr,
    eta_target: LinearExpr,
    upd: Update,
    dists,
    region: Region | None = None,
):
    """Exact (min, max) of η(ℓ′, u(ν, μ)) − η(ℓ, ν) over the support (and over
    the region when the difference depends on ν).  Unbounded ends are None."""
    diffs = [
        post_for_sample(eta_target, upd, mu) - eta_src
        for mu in support_product(upd, dists)
    ]
    if all(d.is_constant() for d in diffs):
        values = [d.const for d in diffs]
        return (min(values), max(values))
    if region is None:
        raise ValueError("valuation-dependent difference needs a region")
    lo: Fraction | None = None
    hi: Fraction | None = None
    lo_unbounded = hi_unbounded = False
    for d in diffs:
        for poly in region:
            status, value, _ = poly.maximize(d)
            if status == "optimal":
                hi = value if hi is None else max(hi, value)
            elif status == "unbounded":
                hi_unbounded = True
            status, value, _ = poly.maximize(-d)
            if status == "optimal":
                v = -value
                lo = v if lo is None else min(lo, v)
            elif status == "unbounded":
                lo_unbounded = True
    return (None if lo_unbounded else lo, None if hi_unbounded else hi)


# ---------------------------------------------------------------------------
# The checker.


def _check_upper(
    region: Region, expr: LinearExpr, bound: Fraction,
    condition: str, label: int, transition: str, detail: str,
    violations: list[Violation],
):
    """Require expr <= bound on every nonempty disjunct of region."""
    for poly in region:
        status, value, argmax = poly.maximize(expr)
        if status == "infeasible":
            continue
        if status == "unbounded":
            violations.append(
                Violation(condition, label, transition,
                          f"{detail}: unbounded above (no bound {bound})")
            )
        elif value > bound:
            violations.append(
                Violation(condition, label, transition,
                          f"{detail}: reaches {value} > {bound}", argmax)
            )


def _transition_name(t: Transition) -> str:
    return f"{t.src}->{t.target}"


def check_dsm(
    candidate: DSMMap, loop: CFG, inv, dists, *, skip_d5: bool = False
) -> CheckReport:
    eta = candidate.eta
    for lab in loop.all_labels():
        if lab not in eta:
            raise CoverageError(f"DSM-map has no entry for label {lab}")
    eps, a, b, c = candidate.epsilon, candidate.a, candidate.b, candidate.c
    violations: list[Violation] = []

    for label in sorted(loop.labels):
        kind = loop.labels[label]
        region = inv.at(label)
        ts = loop.out(label)
        if kind == "assign":
            (t,) = ts
            name = _transition_name(t)
            for mu in support_product(t.update, dists):
                diff = post_for_sample(eta[t.target], t.update, mu) - eta[label]
                tag = ", ".join(f"{r}={v}" for r, v in sorted(mu.items()))
                tag = f" [{tag}]" if tag else ""
                _check_upper(region, diff, b, "D1", label, name,
                             f"diff upper{tag}", violations)
                _check_upper(region, -diff, -a, "D1", label, name,
                             f"diff lower{tag}", violations)
            ediff = expected_post(eta[t.target], t.update, dists) - eta[label]
            _check_upper(region, ediff, -eps, "D1", label, name,
                         "expected decrease", violations)
        elif kind == "branch":
            for t in ts:
                name = _transition_name(t)
                dom = region_intersect(region, t.region)
                diff = eta[t.target] - eta[label]
                _check_upper(dom, diff, b, "D2", label, name, "diff upper", violations)
                _check_upper(dom, diff, -eps, "D2", label, name,
                             "diff decrease", violations)
                _check_upper(dom, -diff, -a, "D2", label, name, "diff lower", violations)
        elif kind == "nondet":
            for t in ts:
                name = _transition_name(t)
                diff = eta[t.target] - eta[label]
                _check_upper(region, diff, b, "D3", label, name, "diff upper", violations)
                _check_upper(region, diff, -eps, "D3", label, name,
                             "diff decrease", violations)
                _check_upper(region, -diff, -a, "D3", label, name,
                             "diff lower", violations)
        elif kind == "prob":
            mix = LinearExpr()
            for t in ts:
                name = _transition_name(t)
                diff = eta[t.target] - eta[label]
                _check_upper(region, diff, b, "D4", label, name, "diff upper", violations)
                _check_upper(region, -diff, -a, "D4", label, name,
                             "diff lower", violations)
                mix = mix + eta[t.target] * t.prob
            _check_upper(region, mix - eta[label], -eps, "D4", label,
                         f"{label}->*", "expected decrease", violations)

    if not skip_d5:
        head = loop.out(loop.l_in)
        guard_t = next(
            (t for t in head if t.kind == "guard" and t.target != loop.l_out), None
        )
        dom = inv.at(loop.l_in)
        if guard_t is not None:
            dom = region_intersect(dom, guard_t.region)
        _check_upper(dom, -eta[loop.l_in], -c, "D5", loop.l_in,
                     f"{loop.l_in}", "lower bound at loop head", violations)

    violations.sort(key=Violation.sort_key)
    return CheckReport(violations)


def check_partial_dsm(candidate: DSMMap, loop: CFG, inv, dists) -> CheckReport:
    return check_dsm(candidate, loop, inv, dists, skip_d5=True)


# ---------------------------------------------------------------------------
# Certificate file format (.dsm).


def parse_dsm(text: str) -> DSMMap:
    eta: dict[int, LinearExpr] = {}
    params: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key in ("eps", "a", "b", "c"):
            params[key] = Fraction(value)
        elif key.startswith("eta"):
            try:
                label = int(key[3:].strip())
            except ValueError as exc:
                raise ProgramSyntaxError(f"bad eta label {key!r}", lineno, 1) from exc
            eta[label] = parse_linear_expr(value)
        else:
            raise ProgramSyntaxError(f"unrecognized line {line!r}", lineno, 1)
    missing = {"eps", "a", "b", "c"} - set(params)
    if missing:
        raise ProgramSyntaxError(f"missing parameters: {sorted(missing)}", 1, 1)
    return DSMMap(eta, params["eps"], params["a"], params["b"], params["c"])


def render_dsm(dsm: DSMMap) -> str:
    lines = [
        f"eps: {dsm.epsilon}",
        f"a: {dsm.a}",
        f"b: {dsm.b}",
        f"c: {dsm.c}",
    ]
    for label in sorted(dsm.eta):
        lines.append(f"eta {label}: {dsm.eta[label].render()}")
    return "\n".join(lines) + "\n"
