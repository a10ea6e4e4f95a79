"""Control-flow graphs for the probabilistic while-language.

Labels are partitioned into assignment / branch / probabilistic /
nondeterministic kinds.  ``skip`` lowers to an identity-update assignment.
Sequencing adds no labels: a statement's outgoing transition targets the label
of the next statement (or the loop head / terminal label).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import SemanticError
from .frontend import (
    Assign,
    IfGuard,
    IfProb,
    IfStar,
    Pred,
    ProgramAST,
    Seq,
    Skip,
    Stmt,
    While,
    pred_not,
)
from .linexpr import LinearExpr
from .ratlp import Region, pred_to_union


@dataclass(frozen=True)
class Update:
    """target := rhs;  target None means the identity update (skip)."""

    target: Optional[str]
    rhs: Optional[LinearExpr]

    def is_identity(self) -> bool:
        return self.target is None


IDENTITY = Update(None, None)


@dataclass(frozen=True)
class Transition:
    src: int
    target: int
    kind: str  # 'update' | 'guard' | 'star' | 'prob'
    update: Optional[Update] = None
    pred: Optional[Pred] = None  # guard transitions: the (possibly negated) guard
    region: Optional[Region] = None  # pred normalized over pvars
    prob: Optional[Fraction] = None


@dataclass
class CFG:
    pvars: tuple[str, ...]
    dists: dict
    labels: dict[int, str]  # label -> 'assign'|'branch'|'prob'|'nondet'
    transitions: dict[int, tuple[Transition, ...]]
    l_in: int
    l_out: int

    def all_labels(self) -> list[int]:
        return sorted(set(self.labels) | {self.l_out})

    def out(self, label: int) -> tuple[Transition, ...]:
        return self.transitions.get(label, ())


def _entry(s: Stmt) -> int:
    return _entry(s.first) if isinstance(s, Seq) else s.label


def build_cfg(prog: ProgramAST) -> CFG:
    labels: dict[int, str] = {}
    transitions: dict[int, tuple[Transition, ...]] = {}
    pvars = prog.pvars

    def add(t: Transition):
        transitions[t.src] = transitions.get(t.src, ()) + (t,)

    def lower(s: Stmt, next_label: int):
        if isinstance(s, Skip):
            labels[s.label] = "assign"
            add(Transition(s.label, next_label, "update", update=IDENTITY))
        elif isinstance(s, Assign):
            labels[s.label] = "assign"
            add(Transition(s.label, next_label, "update", update=Update(s.var, s.expr)))
        elif isinstance(s, Seq):
            lower(s.first, _entry(s.second))
            lower(s.second, next_label)
        elif isinstance(s, IfGuard):
            labels[s.label] = "branch"
            neg = pred_not(s.guard)
            add(
                Transition(
                    s.label, _entry(s.then), "guard",
                    pred=s.guard, region=pred_to_union(s.guard, pvars),
                )
            )
            add(
                Transition(
                    s.label, _entry(s.els), "guard",
                    pred=neg, region=pred_to_union(neg, pvars),
                )
            )
            lower(s.then, next_label)
            lower(s.els, next_label)
        elif isinstance(s, IfStar):
            labels[s.label] = "nondet"
            add(Transition(s.label, _entry(s.then), "star"))
            add(Transition(s.label, _entry(s.els), "star"))
            lower(s.then, next_label)
            lower(s.els, next_label)
        elif isinstance(s, IfProb):
            labels[s.label] = "prob"
            add(Transition(s.label, _entry(s.then), "prob", prob=s.p))
            add(Transition(s.label, _entry(s.els), "prob", prob=1 - s.p))
            lower(s.then, next_label)
            lower(s.els, next_label)
        elif isinstance(s, While):
            labels[s.label] = "branch"
            neg = pred_not(s.guard)
            add(
                Transition(
                    s.label, _entry(s.body), "guard",
                    pred=s.guard, region=pred_to_union(s.guard, pvars),
                )
            )
            add(
                Transition(
                    s.label, next_label, "guard",
                    pred=neg, region=pred_to_union(neg, pvars),
                )
            )
            lower(s.body, s.label)
        else:
            raise TypeError(s)

    lower(prog.root, prog.terminal_label)

    cfg = CFG(
        pvars=pvars,
        dists=prog.dists,
        labels=labels,
        transitions=transitions,
        l_in=_entry(prog.root),
        l_out=prog.terminal_label,
    )
    _check_reachable(cfg)
    return cfg


def _check_reachable(cfg: CFG):
    seen = {cfg.l_in}
    work = deque([cfg.l_in])
    while work:
        lab = work.popleft()
        for t in cfg.out(lab):
            if t.target not in seen:
                seen.add(t.target)
                work.append(t.target)
    unreachable = set(cfg.labels) - seen
    if unreachable:
        raise SemanticError(f"unreachable labels: {sorted(unreachable)}")


# ---------------------------------------------------------------------------
# Loop nesting.


@dataclass
class LoopNode:
    label: int
    guard: Pred
    guard_region: Region
    body_labels: frozenset[int]
    exit_label: int
    children: tuple["LoopNode", ...]


def loop_forest(cfg: CFG, prog: ProgramAST) -> list[LoopNode]:
    pvars = cfg.pvars

    def forest(s: Stmt, next_label: int) -> list[LoopNode]:
        if isinstance(s, Seq):
            return forest(s.first, _entry(s.second)) + forest(s.second, next_label)
        if isinstance(s, (IfGuard, IfStar, IfProb)):
            return forest(s.then, next_label) + forest(s.els, next_label)
        if isinstance(s, While):
            children = forest(s.body, s.label)
            from .frontend import stmt_labels

            return [
                LoopNode(
                    label=s.label,
                    guard=s.guard,
                    guard_region=pred_to_union(s.guard, pvars),
                    body_labels=frozenset(stmt_labels(s.body)),
                    exit_label=next_label,
                    children=tuple(children),
                )
            ]
        return []

    return forest(prog.root, prog.terminal_label)


def iter_loops(forest: list[LoopNode]):
    for node in forest:
        yield node
        yield from iter_loops(list(node.children))


def loop_subcfg(cfg: CFG, node: LoopNode) -> CFG:
    scope = {node.label} | set(node.body_labels)
    labels = {lab: cfg.labels[lab] for lab in scope}
    transitions = {lab: cfg.transitions[lab] for lab in scope}
    return CFG(
        pvars=cfg.pvars,
        dists=cfg.dists,
        labels=labels,
        transitions=transitions,
        l_in=node.label,
        l_out=node.exit_label,
    )


# ---------------------------------------------------------------------------
# DOT rendering.


def emit_dot(cfg: CFG) -> str:
    from .frontend import render_pred

    lines = ["digraph cfg {"]
    for lab in cfg.all_labels():
        kind = cfg.labels.get(lab, "out")
        shape = {"assign": "box", "branch": "diamond", "prob": "ellipse",
                 "nondet": "hexagon", "out": "doublecircle"}[kind]
        lines.append(f'  {lab} [shape={shape}, label="{lab}"];')
    for lab in sorted(cfg.transitions):
        for t in cfg.transitions[lab]:
            if t.kind == "update":
                text = "skip" if t.update.is_identity() else (
                    f"{t.update.target} := {t.update.rhs.render()}"
                )
            elif t.kind == "guard":
                text = render_pred(t.pred)
            elif t.kind == "prob":
                text = str(t.prob)
            else:
                text = "*"
            lines.append(f'  {t.src} -> {t.target} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
