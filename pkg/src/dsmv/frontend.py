"""Parser for the probabilistic while-language and its predicate sublanguage.

Program files (.pp) consist of optional distribution headers followed by one
program::

    dist r = {1: 1/4, -1: 3/4};
    # comment
    while x >= 1 do
        x := x + r
    od

Statements: ``skip``, ``v := e``, ``if G then S else S fi``,
``if * then S else S fi`` (nondeterministic), ``if prob(p) then S else S fi``,
``while G do S od``, and ``;``-sequencing.  Arithmetic is affine; guards are
propositional formulas over atoms ``e < e' | e <= e' | e > e' | e >= e' | e = e'``
with ``and``/``or``/``not``.

Labels are assigned by the parser in textual order (1..n, terminal label n+1),
so they match the numeric comments conventionally written next to listings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import NonlinearError, ProgramSyntaxError, SemanticError
from .linexpr import LinearExpr

# ---------------------------------------------------------------------------
# Tokens


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9']*)
  | (?P<op>:=|<=|>=|<|>|=|\(|\)|\{|\}|\+|-|\*|/|;|:|,|\|)
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "skip", "if", "then", "else", "fi", "while", "do", "od",
    "prob", "dist", "and", "or", "not", "true", "false",
}


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | keyword | operator | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.start() != pos:
            raise ProgramSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        kind = m.lastgroup
        if kind == "num":
            tokens.append(Token("num", lexeme, line, col))
        elif kind == "ident":
            tokens.append(Token(lexeme if lexeme in KEYWORDS else "ident", lexeme, line, col))
        elif kind == "op":
            tokens.append(Token(lexeme, lexeme, line, col))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Skip:
    label: int


@dataclass(frozen=True)
class Assign:
    label: int
    var: str
    expr: LinearExpr


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"


@dataclass(frozen=True)
class IfGuard:
    label: int
    guard: "Pred"
    then: "Stmt"
    els: "Stmt"


@dataclass(frozen=True)
class IfStar:
    label: int
    then: "Stmt"
    els: "Stmt"


@dataclass(frozen=True)
class IfProb:
    label: int
    p: Fraction
    then: "Stmt"
    els: "Stmt"


@dataclass(frozen=True)
class While:
    label: int
    guard: "Pred"
    body: "Stmt"


Stmt = Skip | Assign | Seq | IfGuard | IfStar | IfProb | While


# Predicate AST --------------------------------------------------------------


@dataclass(frozen=True)
class PBool:
    value: bool


@dataclass(frozen=True)
class PAtom:
    lhs: LinearExpr
    op: str  # '<' '<=' '>' '>=' '='
    rhs: LinearExpr


@dataclass(frozen=True)
class PNot:
    arg: "Pred"


@dataclass(frozen=True)
class PAnd:
    args: tuple["Pred", ...]


@dataclass(frozen=True)
class POr:
    args: tuple["Pred", ...]


Pred = PBool | PAtom | PNot | PAnd | POr

P_TRUE = PBool(True)
P_FALSE = PBool(False)


def pred_not(p: Pred) -> Pred:
    if isinstance(p, PBool):
        return PBool(not p.value)
    if isinstance(p, PNot):
        return p.arg
    return PNot(p)


def eval_pred(p: Pred, valuation) -> bool:
    if isinstance(p, PBool):
        return p.value
    if isinstance(p, PAtom):
        l = p.lhs.evaluate(valuation)
        r = p.rhs.evaluate(valuation)
        return {"<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r, "=": l == r}[p.op]
    if isinstance(p, PNot):
        return not eval_pred(p.arg, valuation)
    if isinstance(p, PAnd):
        return all(eval_pred(q, valuation) for q in p.args)
    if isinstance(p, POr):
        return any(eval_pred(q, valuation) for q in p.args)
    raise TypeError(p)


def pred_variables(p: Pred) -> set[str]:
    if isinstance(p, PBool):
        return set()
    if isinstance(p, PAtom):
        return p.lhs.variables() | p.rhs.variables()
    if isinstance(p, PNot):
        return pred_variables(p.arg)
    return set().union(*(pred_variables(q) for q in p.args))


# DNF ------------------------------------------------------------------------


def _nnf(p: Pred, negate: bool) -> Pred:
    if isinstance(p, PBool):
        return PBool(p.value != negate)
    if isinstance(p, PAtom):
        if not negate:
            return p
        flip = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}
        if p.op == "=":
            return POr((PAtom(p.lhs, "<", p.rhs), PAtom(p.lhs, ">", p.rhs)))
        return PAtom(p.lhs, flip[p.op], p.rhs)
    if isinstance(p, PNot):
        return _nnf(p.arg, not negate)
    if isinstance(p, PAnd):
        args = tuple(_nnf(q, negate) for q in p.args)
        return POr(args) if negate else PAnd(args)
    if isinstance(p, POr):
        args = tuple(_nnf(q, negate) for q in p.args)
        return PAnd(args) if negate else POr(args)
    raise TypeError(p)


def dnf_atoms(p: Pred) -> list[list[PAtom]] | None:
    """DNF as a list of conjuncts (lists of atoms); None means 'false'.

    An empty conjunct list element means 'true' (no constraints).
    """
    p = _nnf(p, False)

    def rec(q: Pred) -> list[list[PAtom]]:
        if isinstance(q, PBool):
            return [[]] if q.value else []
        if isinstance(q, PAtom):
            return [[q]]
        if isinstance(q, POr):
            out: list[list[PAtom]] = []
            for arg in q.args:
                out.extend(rec(arg))
            return out
        if isinstance(q, PAnd):
            disjuncts: list[list[PAtom]] = [[]]
            for arg in q.args:
                arg_d = rec(arg)
                disjuncts = [d + e for d in disjuncts for e in arg_d]
            return disjuncts
        raise TypeError(q)

    return rec(p)


# ---------------------------------------------------------------------------
# Distributions


@dataclass(frozen=True)
class DiscreteDist:
    """Finite-support integer distribution with exact rational masses."""

    support: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        values = [v for v, _ in self.support]
        if len(set(values)) != len(values):
            raise SemanticError("duplicate support value in distribution")
        if any(p <= 0 for _, p in self.support):
            raise SemanticError("distribution probabilities must be positive")
        if sum((p for _, p in self.support), Fraction(0)) != 1:
            raise SemanticError("distribution probabilities must sum to 1")

    def expectation(self) -> Fraction:
        return sum((Fraction(v) * p for v, p in self.support), Fraction(0))


# ---------------------------------------------------------------------------
# Program AST


@dataclass
class ProgramAST:
    root: Stmt
    pvars: tuple[str, ...]
    rvars: tuple[str, ...]
    dists: dict[str, DiscreteDist]
    labels: dict[int, Stmt]
    terminal_label: int = field(default=0)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.next_label = 1

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg: str):
        t = self.tok
        raise ProgramSyntaxError(msg, t.line, t.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            self.error(f"expected {kind!r}, found {self.tok.text or 'end of input'!r}")
        return self.advance()

    def at(self, *kinds: str) -> bool:
        return self.tok.kind in kinds

    def fresh_label(self) -> int:
        lab = self.next_label
        self.next_label += 1
        return lab

    # -- numbers / expressions --------------------------------------------

    def parse_number(self) -> Fraction:
        """Rational literal: 5, 0.25, or 6/13; optional leading minus."""
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        num = Fraction(self.expect("num").text)
        if self.at("/"):
            self.advance()
            num /= Fraction(self.expect("num").text)
        return -num if neg else num

    def parse_factor(self) -> LinearExpr:
        if self.at("("):
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if self.at("-"):
            self.advance()
            return -self.parse_factor()
        if self.at("num"):
            k = Fraction(self.advance().text)
            if self.at("/"):
                self.advance()
                k /= Fraction(self.expect("num").text)
            return LinearExpr.const_expr(k)
        if self.at("ident"):
            return LinearExpr.var(self.advance().text)
        self.error("expected expression")

    def parse_term(self) -> LinearExpr:
        e = self.parse_factor()
        while self.at("*"):
            tok = self.tok
            self.advance()
            f = self.parse_factor()
            if e.is_constant():
                e = f * e.const
            elif f.is_constant():
                e = e * f.const
            else:
                raise NonlinearError(
                    f"{tok.line}:{tok.col}: product of two non-constant expressions"
                )
        return e

    def parse_expr(self) -> LinearExpr:
        e = self.parse_term()
        while self.at("+", "-"):
            if self.advance().kind == "+":
                e = e + self.parse_term()
            else:
                e = e - self.parse_term()
        return e

    # -- predicates --------------------------------------------------------

    def parse_pred(self) -> Pred:
        p = self.parse_conj()
        args = [p]
        while self.at("or", "|"):
            self.advance()
            args.append(self.parse_conj())
        return POr(tuple(args)) if len(args) > 1 else p

    def parse_conj(self) -> Pred:
        p = self.parse_pred_lit()
        args = [p]
        while self.at("and"):
            self.advance()
            args.append(self.parse_pred_lit())
        return PAnd(tuple(args)) if len(args) > 1 else p

    def parse_pred_lit(self) -> Pred:
        if self.at("not"):
            self.advance()
            return pred_not(self.parse_pred_lit())
        if self.at("true"):
            self.advance()
            return P_TRUE
        if self.at("false"):
            self.advance()
            return P_FALSE
        if self.at("("):
            # Could be a parenthesized predicate or a parenthesized expression
            # inside an atom; re-parse as predicate and fall back to atom.
            save = self.i
            self.advance()
            try:
                p = self.parse_pred()
                self.expect(")")
                if self.at("<", "<=", ">", ">=", "="):
                    raise ProgramSyntaxError("atom", 0, 0)  # backtrack below
                return p
            except (ProgramSyntaxError, NonlinearError):
                self.i = save
        return self.parse_atom()

    def parse_atom(self) -> PAtom:
        lhs = self.parse_expr()
        if not self.at("<", "<=", ">", ">=", "="):
            self.error("expected comparison operator")
        op = self.advance().kind
        rhs = self.parse_expr()
        return PAtom(lhs, op, rhs)

    # -- statements --------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        s = self.parse_basic()
        while self.at(";"):
            self.advance()
            s = Seq(s, self.parse_basic())
        return s

    def parse_basic(self) -> Stmt:
        if self.at("skip"):
            self.advance()
            return Skip(self.fresh_label())
        if self.at("ident"):
            name = self.advance().text
            self.expect(":=")
            lab = self.fresh_label()
            return Assign(lab, name, self.parse_expr())
        if self.at("while"):
            self.advance()
            lab = self.fresh_label()
            guard = self.parse_pred()
            self.expect("do")
            body = self.parse_stmt()
            self.expect("od")
            return While(lab, guard, body)
        if self.at("if"):
            self.advance()
            lab = self.fresh_label()
            if self.at("*"):
                self.advance()
                self.expect("then")
                then = self.parse_stmt()
                self.expect("else")
                els = self.parse_stmt()
                self.expect("fi")
                return IfStar(lab, then, els)
            if self.at("prob"):
                self.advance()
                self.expect("(")
                p = self.parse_number()
                self.expect(")")
                self.expect("then")
                then = self.parse_stmt()
                self.expect("else")
                els = self.parse_stmt()
                self.expect("fi")
                if not 0 <= p <= 1:
                    raise SemanticError(f"probability {p} outside [0, 1]")
                return IfProb(lab, p, then, els)
            guard = self.parse_pred()
            self.expect("then")
            then = self.parse_stmt()
            self.expect("else")
            els = self.parse_stmt()
            self.expect("fi")
            return IfGuard(lab, guard, then, els)
        self.error("expected statement")

    # -- headers -----------------------------------------------------------

    def parse_dists(self) -> dict[str, DiscreteDist]:
        dists: dict[str, DiscreteDist] = {}
        while self.at("dist"):
            self.advance()
            name = self.expect("ident").text
            if name in dists:
                raise SemanticError(f"duplicate distribution for {name!r}")
            self.expect("=")
            self.expect("{")
            support: list[tuple[int, Fraction]] = []
            while True:
                v = self.parse_number()
                if v.denominator != 1:
                    raise SemanticError("distribution support values must be integers")
                self.expect(":")
                support.append((int(v), self.parse_number()))
                if self.at(","):
                    self.advance()
                    continue
                break
            self.expect("}")
            if self.at(";"):
                self.advance()
            dists[name] = DiscreteDist(tuple(support))
        return dists


# ---------------------------------------------------------------------------
# Semantic analysis helpers


def _walk_stmts(s: Stmt):
    yield s
    if isinstance(s, Seq):
        yield from _walk_stmts(s.first)
        yield from _walk_stmts(s.second)
    elif isinstance(s, (IfGuard, IfStar, IfProb)):
        yield from _walk_stmts(s.then)
        yield from _walk_stmts(s.els)
    elif isinstance(s, While):
        yield from _walk_stmts(s.body)


def stmt_labels(s: Stmt) -> dict[int, Stmt]:
    return {t.label: t for t in _walk_stmts(s) if not isinstance(t, Seq)}


def parse_program(text: str) -> ProgramAST:
    parser = _Parser(tokenize(text))
    dists = parser.parse_dists()
    root = parser.parse_stmt()
    parser.expect("eof")
    terminal = parser.next_label

    rvars = tuple(dists)
    pvar_order: list[str] = []

    def note_pvar(v: str):
        if v not in dists and v not in pvar_order:
            pvar_order.append(v)

    for s in _walk_stmts(root):
        if isinstance(s, Assign):
            if s.var in dists:
                raise SemanticError(f"sampling variable {s.var!r} cannot be assigned")
            note_pvar(s.var)
            for v in sorted(s.expr.variables()):
                note_pvar(v)
        elif isinstance(s, (IfGuard, While)):
            for v in sorted(pred_variables(s.guard)):
                if v in dists:
                    raise SemanticError(
                        f"sampling variable {v!r} used in a guard (guards range over program variables)"
                    )
                note_pvar(v)

    labels = stmt_labels(root)
    return ProgramAST(
        root=root,
        pvars=tuple(pvar_order),
        rvars=rvars,
        dists=dists,
        labels=labels,
        terminal_label=terminal,
    )


# ---------------------------------------------------------------------------
# Linear-predicate entry points (polyhedral view lives in ratlp)


def parse_predicate(text: str) -> Pred:
    parser = _Parser(tokenize(text))
    p = parser.parse_pred()
    parser.expect("eof")
    return p


def parse_linear_expr(text: str) -> LinearExpr:
    parser = _Parser(tokenize(text))
    e = parser.parse_expr()
    parser.expect("eof")
    return e


def parse_linear_predicate(text: str, varnames: tuple[str, ...] | None = None):
    """Parse a predicate and normalize to a union of integer polyhedra.

    Returns a tuple of :class:`dsmv.ratlp.Polyhedron`; strict atoms are
    tightened using integrality (``x < k`` becomes ``x <= k - 1`` after
    clearing denominators).
    """
    from .ratlp import pred_to_union

    p = parse_predicate(text)
    if varnames is None:
        varnames = tuple(sorted(pred_variables(p)))
    return pred_to_union(p, varnames)


# ---------------------------------------------------------------------------
# Pretty-printing (round-trips through parse_program up to whitespace)


def render_pred(p: Pred, parent: str = "or") -> str:
    if isinstance(p, PBool):
        return "true" if p.value else "false"
    if isinstance(p, PAtom):
        return f"{p.lhs.render()} {p.op} {p.rhs.render()}"
    if isinstance(p, PNot):
        return f"not ({render_pred(p.arg)})"
    if isinstance(p, PAnd):
        s = " and ".join(render_pred(q, "and") for q in p.args)
        return s
    if isinstance(p, POr):
        s = " or ".join(render_pred(q, "or") for q in p.args)
        return f"({s})" if parent == "and" else s
    raise TypeError(p)


def render_stmt(s: Stmt, indent: int = 0) -> str:
    pad = "    " * indent
    if isinstance(s, Skip):
        return f"{pad}skip"
    if isinstance(s, Assign):
        return f"{pad}{s.var} := {s.expr.render()}"
    if isinstance(s, Seq):
        return f"{render_stmt(s.first, indent)};\n{render_stmt(s.second, indent)}"
    if isinstance(s, While):
        return (
            f"{pad}while {render_pred(s.guard)} do\n"
            f"{render_stmt(s.body, indent + 1)}\n{pad}od"
        )
    if isinstance(s, IfGuard):
        head = f"if {render_pred(s.guard)} then"
    elif isinstance(s, IfStar):
        head = "if * then"
    else:
        head = f"if prob({s.p}) then"
    return (
        f"{pad}{head}\n{render_stmt(s.then, indent + 1)}\n{pad}else\n"
        f"{render_stmt(s.els, indent + 1)}\n{pad}fi"
    )


def render_program(prog: ProgramAST) -> str:
    lines = []
    for name, dist in prog.dists.items():
        entries = ", ".join(f"{v}: {p}" for v, p in dist.support)
        lines.append(f"dist {name} = {{{entries}}};")
    lines.append(render_stmt(prog.root))
    return "\n".join(lines) + "\n"
