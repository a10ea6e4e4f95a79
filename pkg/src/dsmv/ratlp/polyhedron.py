"""Rational polyhedra {x | Ax <= b} over named variables, plus the predicate
normalization that turns parsed guards/invariants into unions of polyhedra.

Integer tightening: atoms are scaled by the LCM of their denominators so all
coefficients are integers, then strict inequalities drop to the next integer
(x < k  becomes  x <= k-1), which is exact because program variables range
over integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from ..errors import DimensionError, EmptyPolyhedronError
from ..linexpr import LinearExpr
from .simplex import Constraint, Feasible, Infeasible, LPProblem, Unbounded, lp_solve


@dataclass(frozen=True)
class Polyhedron:
    varnames: tuple[str, ...]
    rows: tuple[tuple[Fraction, ...], ...]
    rhs: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.rhs):
            raise DimensionError("row/rhs count mismatch")
        for r in self.rows:
            if len(r) != len(self.varnames):
                raise DimensionError("row width does not match variable count")

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.varnames)

    # -- construction ------------------------------------------------------

    @classmethod
    def true(cls, varnames: tuple[str, ...]) -> "Polyhedron":
        return cls(varnames, (), ())

    @classmethod
    def from_constraints(
        cls, varnames: tuple[str, ...], constraints: list[tuple[LinearExpr, Fraction]]
    ) -> "Polyhedron":
        """Each (e, k) means e <= k."""
        rows, rhs = [], []
        index = {v: i for i, v in enumerate(varnames)}
        for e, k in constraints:
            row = [Fraction(0)] * len(varnames)
            for v, c in e.coeffs.items():
                if v not in index:
                    raise DimensionError(f"variable {v!r} not among {varnames}")
                row[index[v]] = c
            rows.append(tuple(row))
            rhs.append(Fraction(k) - e.const)
        return cls(varnames, tuple(rows), tuple(rhs))

    # -- views -------------------------------------------------------------

    def row_exprs(self) -> list[tuple[LinearExpr, Fraction]]:
        out = []
        for row, k in zip(self.rows, self.rhs):
            out.append((LinearExpr(dict(zip(self.varnames, row))), k))
        return out

    def contains(self, point: dict) -> bool:
        for row, k in zip(self.rows, self.rhs):
            if sum(c * Fraction(point[v]) for v, c in zip(self.varnames, row)) > k:
                return False
        return True

    def aligned(self, varnames: tuple[str, ...]) -> "Polyhedron":
        """Re-order/extend columns to a superset variable list."""
        if varnames == self.varnames:
            return self
        missing = set(self.varnames) - set(varnames)
        if missing:
            raise DimensionError(f"cannot drop variables {missing}")
        index = {v: i for i, v in enumerate(self.varnames)}
        rows = tuple(
            tuple(r[index[v]] if v in index else Fraction(0) for v in varnames)
            for r in self.rows
        )
        return Polyhedron(tuple(varnames), rows, self.rhs)

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        other = other.aligned(self.varnames)
        return Polyhedron(self.varnames, self.rows + other.rows, self.rhs + other.rhs)

    # -- decision procedures ----------------------------------------------

    def _lp(self, objective=None) -> LPProblem:
        cons = [
            Constraint(
                {v: c for v, c in zip(self.varnames, row) if c != 0}, "<=", k
            )
            for row, k in zip(self.rows, self.rhs)
        ]
        return LPProblem(list(self.varnames), cons, set(), objective)

    def is_empty(self) -> bool:
        return isinstance(lp_solve(self._lp()), Infeasible)

    def maximize(self, e: LinearExpr):
        """Max of e over the polyhedron.

        Returns ('infeasible', None, None), ('unbounded', None, witness-free)
        or ('optimal', value, argmax).
        """
        res = lp_solve(self._lp(("max", dict(e.coeffs))))
        if isinstance(res, Infeasible):
            return ("infeasible", None, None)
        if isinstance(res, Unbounded):
            return ("unbounded", None, None)
        return ("optimal", res.optimum + e.const, res.assignment)

    def render(self) -> str:
        parts = []
        for e, k in self.row_exprs():
            parts.append(f"{e.render()} <= {k}")
        return " and ".join(parts) if parts else "true"


def polyhedron_includes(h: Polyhedron, c: LinearExpr, d: Fraction) -> bool:
    """Is {x | Ax <= b} contained in {x | c(x) <= d}?  (c may carry a constant.)"""
    status, value, _ = h.maximize(c)
    if status == "infeasible":
        raise EmptyPolyhedronError("inclusion query on an empty polyhedron")
    if status == "unbounded":
        return False
    return value <= Fraction(d)


# ---------------------------------------------------------------------------
# Regions: finite unions of polyhedra.

Region = tuple[Polyhedron, ...]


def region_true(varnames: tuple[str, ...]) -> Region:
    return (Polyhedron.true(varnames),)


def region_intersect(r1: Region, r2: Region) -> Region:
    return tuple(p.intersect(q) for p in r1 for q in r2)


def region_contains(r: Region, point: dict) -> bool:
    return any(p.contains(point) for p in r)


def region_is_empty(r: Region) -> bool:
    return all(p.is_empty() for p in r)


# ---------------------------------------------------------------------------
# Predicate -> union of polyhedra.


def _atom_rows(atom, varnames: tuple[str, ...]) -> list[tuple[LinearExpr, Fraction]]:
    """Normalize one atom to integer-coefficient '<=' constraints."""
    e = atom.lhs - atom.rhs
    op = atom.op
    if op in (">", ">="):
        e = -e
        op = "<" if op == ">" else "<="
    outs = []
    if op == "=":
        outs.append((e, Fraction(0), False))
        outs.append((-e, Fraction(0), False))
    else:
        outs.append((e, Fraction(0), op == "<"))
    rows = []
    for expr, bound, strict in outs:
        denoms = [c.denominator for c in expr.coeffs.values()] + [expr.const.denominator]
        scale = lcm(*denoms) if denoms else 1
        scaled = expr * scale
        rhs = bound * scale - scaled.const
        body = LinearExpr(scaled.coeffs)
        if strict:
            rhs -= 1
        rows.append((body, rhs))
    return rows


def pred_to_union(pred, varnames: tuple[str, ...]) -> Region:
    """DNF-expand a predicate into a union of integer-tightened polyhedra.

    'false' becomes the empty union ().
    """
    from ..frontend import dnf_atoms

    disjuncts = dnf_atoms(pred)
    polys = []
    for conj in disjuncts:
        cons: list[tuple[LinearExpr, Fraction]] = []
        for atom in conj:
            cons.extend(_atom_rows(atom, varnames))
        polys.append(Polyhedron.from_constraints(varnames, cons))
    return tuple(polys)


# ---------------------------------------------------------------------------
# Fourier–Motzkin projection and affine images (used by the invariant lint).


def project(poly: Polyhedron, var: str) -> Polyhedron:
    """Eliminate one variable by Fourier–Motzkin."""
    if var not in poly.varnames:
        return poly
    j = poly.varnames.index(var)
    keep_names = tuple(v for v in poly.varnames if v != var)
    zeros, pos, neg = [], [], []
    for row, k in zip(poly.rows, poly.rhs):
        c = row[j]
        reduced = tuple(x for i, x in enumerate(row) if i != j)
        if c == 0:
            zeros.append((reduced, k))
        elif c > 0:
            pos.append((tuple(x / c for x in reduced), k / c))
        else:
            neg.append((tuple(x / -c for x in reduced), k / -c))
    rows = list(zeros)
    for pr, pk in pos:
        for nr, nk in neg:
            rows.append((tuple(a + b for a, b in zip(pr, nr)), pk + nk))
    return Polyhedron(keep_names, tuple(r for r, _ in rows), tuple(k for _, k in rows))


def affine_image(poly: Polyhedron, target: str, rhs: LinearExpr) -> Polyhedron:
    """Image of poly under the assignment target := rhs (rhs over poly's vars)."""
    tmp = "__post"
    names = poly.varnames + (tmp,)
    ext_rows = tuple(r + (Fraction(0),) for r in poly.rows)
    # tmp = rhs  as two inequalities
    index = {v: i for i, v in enumerate(names)}
    eq = [Fraction(0)] * len(names)
    for v, c in rhs.coeffs.items():
        eq[index[v]] = c
    eq[index[tmp]] = Fraction(-1)
    rows = ext_rows + (tuple(eq), tuple(-c for c in eq))
    rhs_vec = poly.rhs + (-rhs.const, rhs.const)
    ext = Polyhedron(names, rows, rhs_vec)
    projected = project(ext, target)
    renamed_vars = tuple(target if v == tmp else v for v in projected.varnames)
    renamed = Polyhedron(renamed_vars, projected.rows, projected.rhs)
    return renamed.aligned(poly.varnames)
