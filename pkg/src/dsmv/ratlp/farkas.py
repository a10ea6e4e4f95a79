"""Farkas assertion encoding.

For a nonempty polyhedron H = {x | Ax <= b}, the inclusion
H ⊆ {x | c·x <= d} holds iff  ∃ξ >= 0 . Aᵀξ = c  ∧  bᵀξ <= d.
Here c and d may mention unknown template coefficients linearly, so the
emitted constraints stay linear in (ξ, template unknowns) jointly — A and b
are numeric.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..errors import DimensionError
from ..linexpr import LinearExpr
from .polyhedron import Polyhedron
from .simplex import Constraint


def farkas_encode(
    h: Polyhedron,
    c: Sequence[LinearExpr],
    d: LinearExpr,
    prefix: str = "xi",
) -> tuple[list[str], list[Constraint]]:
    """Emit fresh multiplier names and the constraints of Φ[H, c, d](ξ).

    Order: the n equality rows Aᵀξ = c (one per column of H), then bᵀξ <= d,
    then ξ >= 0 (as -ξ_j <= 0).
    """
    if len(c) != h.n:
        raise DimensionError(f"c has {len(c)} entries, H has {h.n} columns")
    xi = [f"{prefix}_{j}" for j in range(h.m)]
    cons: list[Constraint] = []
    for i in range(h.n):
        coeffs: dict[str, Fraction] = {}
        for j in range(h.m):
            aji = h.rows[j][i]
            if aji != 0:
                coeffs[xi[j]] = aji
        # A^T ξ - (c_i unknown part) = c_i constant part
        for u, k in c[i].coeffs.items():
            coeffs[u] = coeffs.get(u, Fraction(0)) - k
        cons.append(Constraint(coeffs, "=", c[i].const))
    coeffs = {}
    for j in range(h.m):
        if h.rhs[j] != 0:
            coeffs[xi[j]] = h.rhs[j]
    for u, k in d.coeffs.items():
        coeffs[u] = coeffs.get(u, Fraction(0)) - k
    cons.append(Constraint(coeffs, "<=", d.const))
    for name in xi:
        cons.append(Constraint({name: Fraction(-1)}, "<=", Fraction(0)))
    return xi, cons
