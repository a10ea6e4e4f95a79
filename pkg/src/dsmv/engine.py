"""The modular proof engine: post-order recursion over the loop forest.

Assignments and skip terminate outright; sequences and branches compose; each
while-loop additionally needs a DSM-map synthesized (and re-checked) on its
scoped sub-CFG.  The result is a certificate tree isomorphic to the program
structure, or the innermost loop that blocked the proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .cfg import CFG, LoopNode, build_cfg, loop_forest, loop_subcfg
from .dsm import DSMMap
from .frontend import Assign, IfGuard, IfProb, IfStar, ProgramAST, Seq, Skip, Stmt, While
from .invariants import Invariant
from .synthesis import Fail, Success, synthesize_dsm


@dataclass
class AtomTerm:
    label: int


@dataclass
class SeqTerm:
    left: "Certificate"
    right: "Certificate"


@dataclass
class BranchTerm:
    kind: str  # 'guard' | 'star' | 'prob'
    left: "Certificate"
    right: "Certificate"


@dataclass
class LoopTerm:
    label: int
    body: "Certificate"
    dsm: DSMMap
    invariant: Invariant


Certificate = Union[AtomTerm, SeqTerm, BranchTerm, LoopTerm]


@dataclass
class Proved:
    certificate: Certificate


@dataclass
class NotProved:
    label: int
    reason: str


class _Blocked(Exception):
    def __init__(self, label: int, reason: str):
        super().__init__(f"loop at label {label}: {reason}")
        self.label = label
        self.reason = reason


def loop_terms(cert: Certificate):
    if isinstance(cert, LoopTerm):
        yield cert
        yield from loop_terms(cert.body)
    elif isinstance(cert, (SeqTerm, BranchTerm)):
        yield from loop_terms(cert.left)
        yield from loop_terms(cert.right)


def prove_termination(prog: ProgramAST, inv: Invariant, dists) -> Proved | NotProved:
    cfg = build_cfg(prog)
    forest = loop_forest(cfg, prog)
    nodes: dict[int, LoopNode] = {}

    def register(ns):
        for n in ns:
            nodes[n.label] = n
            register(n.children)

    register(forest)

    def prove(s: Stmt) -> Certificate:
        if isinstance(s, (Skip, Assign)):
            return AtomTerm(s.label)
        if isinstance(s, Seq):
            return SeqTerm(prove(s.first), prove(s.second))
        if isinstance(s, IfGuard):
            return BranchTerm("guard", prove(s.then), prove(s.els))
        if isinstance(s, IfStar):
            return BranchTerm("star", prove(s.then), prove(s.els))
        if isinstance(s, IfProb):
            return BranchTerm("prob", prove(s.then), prove(s.els))
        if isinstance(s, While):
            body_cert = prove(s.body)  # innermost loops first
            sub = loop_subcfg(cfg, nodes[s.label])
            outcome = synthesize_dsm(sub, inv, dists)
            if isinstance(outcome, Fail):
                raise _Blocked(s.label, outcome.reason)
            assert isinstance(outcome, Success)
            return LoopTerm(s.label, body_cert, outcome.dsm, inv)
        raise TypeError(s)

    try:
        return Proved(prove(prog.root))
    except _Blocked as blocked:
        return NotProved(blocked.label, blocked.reason)
