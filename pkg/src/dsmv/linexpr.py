"""Exact-rational affine expressions over named variables.

Canonical form: zero coefficients are never stored, so structural equality
coincides with semantic equality of affine forms.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Union

Rat = Union[int, Fraction]


class LinearExpr:
    """An affine form  sum_i c_i * x_i + k  with exact rational c_i, k."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[str, Rat] | None = None, const: Rat = 0):
        self.coeffs: dict[str, Fraction] = {}
        if coeffs:
            for var, c in coeffs.items():
                c = Fraction(c)
                if c != 0:
                    self.coeffs[var] = c
        self.const = Fraction(const)

    # -- constructors ------------------------------------------------------

    @classmethod
    def var(cls, name: str) -> "LinearExpr":
        return cls({name: 1})

    @classmethod
    def const_expr(cls, k: Rat) -> "LinearExpr":
        return cls({}, k)

    # -- queries -----------------------------------------------------------

    def variables(self) -> set[str]:
        return set(self.coeffs)

    def is_constant(self) -> bool:
        return not self.coeffs

    def coeff(self, var: str) -> Fraction:
        return self.coeffs.get(var, Fraction(0))

    def evaluate(self, valuation: Mapping[str, Rat]) -> Fraction:
        total = self.const
        for var, c in self.coeffs.items():
            total += c * Fraction(valuation[var])
        return total

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "LinearExpr | Rat") -> "LinearExpr":
        if not isinstance(other, LinearExpr):
            return LinearExpr(self.coeffs, self.const + Fraction(other))
        coeffs = dict(self.coeffs)
        for var, c in other.coeffs.items():
            coeffs[var] = coeffs.get(var, Fraction(0)) + c
        return LinearExpr(coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinearExpr":
        return LinearExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other: "LinearExpr | Rat") -> "LinearExpr":
        if not isinstance(other, LinearExpr):
            return LinearExpr(self.coeffs, self.const - Fraction(other))
        return self + (-other)

    def __rsub__(self, other: Rat) -> "LinearExpr":
        return (-self) + Fraction(other)

    def __mul__(self, k: Rat) -> "LinearExpr":
        k = Fraction(k)
        return LinearExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def substitute(self, var: str, replacement: "LinearExpr") -> "LinearExpr":
        """Replace ``var`` with an affine expression."""
        c = self.coeffs.get(var)
        if c is None:
            return self
        rest = LinearExpr({v: k for v, k in self.coeffs.items() if v != var}, self.const)
        return rest + replacement * c

    def substitute_all(self, mapping: Mapping[str, "LinearExpr"]) -> "LinearExpr":
        out = LinearExpr({}, self.const)
        for var, c in self.coeffs.items():
            if var in mapping:
                out = out + mapping[var] * c
            else:
                out = out + LinearExpr({var: c})
        return out

    # -- equality / rendering ---------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearExpr):
            return NotImplemented
        return self.coeffs == other.coeffs and self.const == other.const

    def __hash__(self) -> int:
        return hash((frozenset(self.coeffs.items()), self.const))

    def __repr__(self) -> str:
        return f"LinearExpr({self.render()!r})"

    def render(self) -> str:
        """Deterministic human/machine-readable rendering, e.g. ``6*x - 3/299*y + 7/299``."""
        parts: list[str] = []
        for var in sorted(self.coeffs):
            c = self.coeffs[var]
            term = var if abs(c) == 1 else f"{abs(c)}*{var}"
            if not parts:
                parts.append(term if c > 0 else f"-{term}")
            else:
                parts.append(f"+ {term}" if c > 0 else f"- {term}")
        if self.const != 0 or not parts:
            k = self.const
            if not parts:
                parts.append(str(k))
            else:
                parts.append(f"+ {k}" if k > 0 else f"- {-k}")
        return " ".join(parts)


def lincomb(terms: Iterable[tuple[Rat, LinearExpr]]) -> LinearExpr:
    """Exact linear combination  sum w_i * e_i."""
    out = LinearExpr()
    for w, e in terms:
        out = out + e * w
    return out
