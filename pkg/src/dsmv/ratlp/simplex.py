"""Exact rational LP solving.

Pipeline: equality-substitution presolve (keeps the tableau small — Farkas
encodings produce many equalities, each eliminable), then a dense two-phase
simplex over ``gmpy2.mpq`` with an anti-cycling pivot rule (Dantzig by
default, switching to Bland's rule under degenerate stalling, which restores
the termination guarantee).

Every Feasible result carries a witness assignment that satisfies each input
constraint exactly; with an objective, the exact optimum is reported or the
problem is classified Unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from gmpy2 import mpq


@dataclass(frozen=True)
class Constraint:
    """``sum coeffs[v]*v  rel  rhs`` with rel in {'<=', '='}."""

    coeffs: dict[str, Fraction]
    rel: str
    rhs: Fraction

    def evaluate(self, assignment) -> Fraction:
        return sum((c * assignment[v] for v, c in self.coeffs.items()), Fraction(0))

    def satisfied(self, assignment) -> bool:
        lhs = self.evaluate(assignment)
        return lhs == self.rhs if self.rel == "=" else lhs <= self.rhs


@dataclass
class LPProblem:
    variables: list[str]
    constraints: list[Constraint]
    nonneg: set[str] = field(default_factory=set)
    # (sense, coeffs) with sense in {'min', 'max'}
    objective: Optional[tuple[str, dict[str, Fraction]]] = None


@dataclass
class Feasible:
    assignment: dict[str, Fraction]
    optimum: Optional[Fraction] = None


@dataclass
class Infeasible:
    pass


@dataclass
class Unbounded:
    pass


LPResult = Feasible | Infeasible | Unbounded


# ---------------------------------------------------------------------------
# Presolve: eliminate '=' constraints by substitution.


def _presolve(p: LPProblem):
    """Substitute away equality constraints.

    Returns (new constraints, remaining vars, nonneg set, objective coeffs,
    eliminations) or Infeasible.  ``eliminations`` is an ordered list of
    (var, coeffs, const) meaning var = sum coeffs[u]*u + const, to be replayed
    in reverse for witness reconstruction.
    """
    rows: list[dict] = [
        {"coeffs": dict(c.coeffs), "rel": c.rel, "rhs": c.rhs} for c in p.constraints
    ]
    obj = dict(p.objective[1]) if p.objective else {}
    nonneg = set(p.nonneg)
    alive = set(p.variables)
    eliminations: list[tuple[str, dict[str, Fraction], Fraction]] = []

    def substitute(row_coeffs: dict, var: str, repl: dict[str, Fraction], const: Fraction):
        c = row_coeffs.pop(var, None)
        if c is None:
            return Fraction(0)
        for u, k in repl.items():
            nc = row_coeffs.get(u, Fraction(0)) + c * k
            if nc == 0:
                row_coeffs.pop(u, None)
            else:
                row_coeffs[u] = nc
        return c * const

    queue = [i for i, r in enumerate(rows) if r["rel"] == "="]
    occurrences: dict[str, int] = {}
    for r in rows:
        for v in r["coeffs"]:
            occurrences[v] = occurrences.get(v, 0) + 1

    for i in queue:
        row = rows[i]
        if row["rel"] != "=":
            continue
        coeffs, rhs = row["coeffs"], row["rhs"]
        if not coeffs:
            if rhs != 0:
                return Infeasible()
            row["rel"] = "drop"
            continue
        # Prefer eliminating a free variable; among candidates, the sparsest.
        free = [v for v in coeffs if v not in nonneg]
        pool = free if free else list(coeffs)
        var = min(pool, key=lambda v: (occurrences.get(v, 0), v))
        c = coeffs.pop(var)
        repl = {u: -k / c for u, k in coeffs.items()}
        const = rhs / c
        eliminations.append((var, repl, const))
        alive.discard(var)
        row["rel"] = "drop"
        for r in rows:
            if r["rel"] == "drop" or var not in r["coeffs"]:
                continue
            delta = substitute(r["coeffs"], var, repl, const)
            r["rhs"] = r["rhs"] - delta if r["rel"] != "=" else r["rhs"] - delta
        if var in obj:
            cobj = obj.pop(var)
            for u, k in repl.items():
                obj[u] = obj.get(u, Fraction(0)) + cobj * k
        # objective constant shift is irrelevant for pivoting but matters for
        # the reported optimum; track it via eliminations replay instead.
        if var in nonneg:
            # var >= 0 must survive as an inequality on its replacement.
            nonneg.discard(var)
            rows.append(
                {
                    "coeffs": {u: -k for u, k in repl.items()},
                    "rel": "<=",
                    "rhs": const,
                }
            )

    out_rows = []
    for r in rows:
        if r["rel"] == "drop":
            continue
        if not r["coeffs"]:
            if r["rel"] == "=" and r["rhs"] != 0:
                return Infeasible()
            if r["rel"] == "<=" and r["rhs"] < 0:
                return Infeasible()
            continue
        out_rows.append(r)
    remaining = [v for v in p.variables if v in alive]
    return out_rows, remaining, nonneg, obj, eliminations


# ---------------------------------------------------------------------------
# Dense two-phase simplex on inequality-only systems.

_STALL_LIMIT = 24


def _pivot(T, obj, basis, r, j, eligible_rows):
    piv = T[r, j]
    if piv != 1:
        T[r] = T[r] / piv
    col = T[:, j]
    nz = [i for i in eligible_rows if i != r and col[i] != 0]
    if nz:
        T[nz] -= np.outer(col[nz].copy(), T[r])
    if obj[j] != 0:
        obj -= obj[j] * T[r]
    basis[r] = j


def _optimize(T, obj, basis, allowed, m):
    """Minimize; returns 'optimal' or 'unbounded'. obj is the reduced-cost row
    with obj[-1] = -objective_value."""
    rows = list(range(m))
    stall = 0
    bland = False
    while True:
        enter = -1
        if not bland:
            best = 0
            for j in range(allowed):
                v = obj[j]
                if v < best:
                    best = v
                    enter = j
        else:
            for j in range(allowed):
                if obj[j] < 0:
                    enter = j
                    break
        if enter < 0:
            return "optimal"
        # ratio test
        leave = -1
        best_ratio = None
        for i in rows:
            a = T[i, enter]
            if a > 0:
                ratio = T[i, -1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded"
        if best_ratio == 0:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
        else:
            stall = 0
            bland = False
        _pivot(T, obj, basis, leave, enter, rows)


def _solve_inequalities(rows, variables, nonneg, obj_coeffs, want_objective):
    """rows: list of {'coeffs','rel'('<='),'rhs'}; returns LPResult over the
    reduced variables."""
    varidx: dict[str, list[int]] = {}
    ncols = 0
    col_sign: list[tuple[str, int]] = []  # column -> (var, +1/-1)
    for v in variables:
        if v in nonneg:
            varidx[v] = [ncols]
            col_sign.append((v, 1))
            ncols += 1
        else:
            varidx[v] = [ncols, ncols + 1]
            col_sign.append((v, 1))
            col_sign.append((v, -1))
            ncols += 2

    m = len(rows)
    zero = mpq(0)
    nstruct = ncols
    total = nstruct + m  # + slacks
    T = np.full((m, total + 1), zero, dtype=object)
    need_artificial = []
    for i, r in enumerate(rows):
        sign = 1 if r["rhs"] >= 0 else -1
        for v, c in r["coeffs"].items():
            q = mpq(c.numerator, c.denominator) * sign
            cols = varidx[v]
            T[i, cols[0]] += q
            if len(cols) == 2:
                T[i, cols[1]] -= q
        T[i, nstruct + i] = mpq(sign)
        T[i, -1] = mpq(r["rhs"].numerator, r["rhs"].denominator) * sign
        if sign < 0:
            need_artificial.append(i)

    basis = [nstruct + i for i in range(m)]
    if need_artificial:
        k = len(need_artificial)
        art = np.full((m, k), zero, dtype=object)
        for idx, i in enumerate(need_artificial):
            art[i, idx] = mpq(1)
        T = np.concatenate([T[:, :-1], art, T[:, -1:]], axis=1)
        art_base = total
        for idx, i in enumerate(need_artificial):
            basis[i] = art_base + idx
        # Phase 1: minimize sum of artificials.
        obj1 = np.full(T.shape[1], zero, dtype=object)
        for i in need_artificial:
            obj1 -= T[i]
        status = _optimize(T, obj1, basis, art_base, m)
        assert status == "optimal"
        if -obj1[-1] != 0:
            return Infeasible()
        # Drive remaining artificials out of the basis.
        for i in range(m):
            if basis[i] >= art_base:
                piv_col = next((j for j in range(art_base) if T[i, j] != 0), None)
                if piv_col is not None:
                    _pivot(T, obj1, basis, i, piv_col, list(range(m)))
        keep = [i for i in range(m) if basis[i] < art_base]
        if len(keep) < m:
            T = T[keep]
            basis = [basis[i] for i in keep]
            m = len(keep)
        T = np.concatenate([T[:, :art_base], T[:, -1:]], axis=1)

    # Phase 2 (or plain feasibility).
    if want_objective:
        obj2 = np.full(T.shape[1], zero, dtype=object)
        for v, c in obj_coeffs.items():
            q = mpq(c.numerator, c.denominator)
            cols = varidx[v]
            obj2[cols[0]] += q
            if len(cols) == 2:
                obj2[cols[1]] -= q
        for i, bi in enumerate(basis):
            if obj2[bi] != 0:
                obj2 -= obj2[bi] * T[i]
        status = _optimize(T, obj2, basis, total, m)
        if status == "unbounded":
            return Unbounded()
        optimum = Fraction(int((-obj2[-1]).numerator), int((-obj2[-1]).denominator))
    else:
        optimum = None

    values = {v: Fraction(0) for v in variables}
    for i, bi in enumerate(basis):
        if bi < nstruct:
            v, s = col_sign[bi]
            q = T[i, -1]
            values[v] += s * Fraction(int(q.numerator), int(q.denominator))
    return Feasible(values, optimum)


# ---------------------------------------------------------------------------
# Public entry point.


def lp_solve(p: LPProblem) -> LPResult:
    pres = _presolve(p)
    if isinstance(pres, Infeasible):
        return pres
    rows, remaining, nonneg, obj_coeffs, eliminations = pres
    want_obj = p.objective is not None
    sense = p.objective[0] if want_obj else "min"
    if want_obj and sense == "max":
        obj_coeffs = {v: -c for v, c in obj_coeffs.items()}

    res = _solve_inequalities(rows, remaining, nonneg, obj_coeffs, want_obj)
    if not isinstance(res, Feasible):
        return res

    assignment = res.assignment
    # Replay eliminations to reconstruct the full witness.
    for var, repl, const in reversed(eliminations):
        assignment[var] = (
            sum((k * assignment[u] for u, k in repl.items()), Fraction(0)) + const
        )

    optimum = None
    if want_obj:
        full_obj = p.objective[1]
        optimum = sum(
            (c * assignment[v] for v, c in full_obj.items()), Fraction(0)
        )
    return Feasible(assignment, optimum)


# ---------------------------------------------------------------------------
# Deterministic text dump.


def dump_lp(p: LPProblem) -> str:
    lines = []
    lines.append("vars: " + " ".join(p.variables))
    lines.append("nonneg: " + " ".join(v for v in p.variables if v in p.nonneg))
    if p.objective:
        sense, coeffs = p.objective
        lines.append(f"{sense}: " + _render_form(coeffs, p.variables))
    for i, c in enumerate(p.constraints):
        rel = "<=" if c.rel == "<=" else "="
        lines.append(f"c{i}: {_render_form(c.coeffs, p.variables)} {rel} {c.rhs}")
    return "\n".join(lines) + "\n"


def _render_form(coeffs: dict[str, Fraction], order: list[str]) -> str:
    parts = []
    rank = {v: i for i, v in enumerate(order)}
    for v in sorted(coeffs, key=lambda v: rank.get(v, len(rank))):
        if coeffs[v] != 0:
            parts.append(f"{coeffs[v]}*{v}")
    return " + ".join(parts) if parts else "0"
