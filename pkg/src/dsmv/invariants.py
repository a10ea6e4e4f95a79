"""Per-label invariants: finite unions of polyhedra over-approximating the
reachable valuations at each label.

Sourced either from a .inv file (``inv <label>: <predicate>`` lines, ``|``
between disjuncts) or from the purely syntactic guard-propagation default.
An inductiveness lint is provided but advisory: over-approximation is all the
DSM conditions need, and a supplied invariant may be sound without being
inductive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cfg import CFG
from .errors import UnknownLabelError
from .frontend import parse_predicate, render_pred
from .ratlp import (
    Region,
    affine_image,
    polyhedron_includes,
    pred_to_union,
    region_intersect,
    region_true,
)


@dataclass
class Invariant:
    pvars: tuple[str, ...]
    regions: dict[int, Region] = field(default_factory=dict)
    source: dict[int, str] = field(default_factory=dict)  # original predicate text

    def at(self, label: int) -> Region:
        return self.regions.get(label, region_true(self.pvars))


def load_invariant(text: str, cfg: CFG) -> Invariant:
    inv = Invariant(cfg.pvars)
    known = set(cfg.all_labels())
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("inv"):
            raise UnknownLabelError(f"line {lineno}: expected 'inv <label>: <predicate>'")
        head, _, predtext = line[3:].partition(":")
        try:
            label = int(head.strip())
        except ValueError as exc:
            raise UnknownLabelError(f"line {lineno}: bad label {head.strip()!r}") from exc
        if label not in known:
            raise UnknownLabelError(f"line {lineno}: label {label} not in the CFG")
        predtext = predtext.strip()
        pred = parse_predicate(predtext)
        inv.regions[label] = pred_to_union(pred, cfg.pvars)
        inv.source[label] = predtext
    return inv


def render_invariant(inv: Invariant) -> str:
    lines = []
    for label in sorted(inv.regions):
        text = inv.source.get(label)
        lines.append(f"inv {label}: {text}")
    return "\n".join(lines) + "\n"


def guard_default_invariant(cfg: CFG) -> Invariant:
    """Conjoin each branch guard into its edge target (negation on the false
    edge), but only where that edge is the target's sole incoming transition —
    otherwise other paths could reach the label outside the guard."""
    indegree: dict[int, int] = {}
    for ts in cfg.transitions.values():
        for t in ts:
            indegree[t.target] = indegree.get(t.target, 0) + 1

    inv = Invariant(cfg.pvars)
    for label in sorted(cfg.transitions):
        if cfg.labels.get(label) != "branch":
            continue
        for t in cfg.transitions[label]:
            if indegree.get(t.target, 0) == 1 and t.target != cfg.l_out:
                inv.regions[t.target] = t.region
                inv.source[t.target] = render_pred(t.pred)
    return inv


# ---------------------------------------------------------------------------
# Advisory inductiveness lint.


@dataclass(frozen=True)
class InductivenessViolation:
    src: int
    target: int
    detail: str


def _region_covered_by(region: Region, target_region: Region) -> bool:
    """Sound-but-incomplete union inclusion: each nonempty disjunct must fit
    inside a single disjunct of the target."""
    for poly in region:
        if poly.is_empty():
            continue
        ok = False
        for q in target_region:
            if all(polyhedron_includes(poly, e, k) for e, k in q.row_exprs()):
                ok = True
                break
        if not ok:
            return False
    return True


def check_inductive(inv: Invariant, cfg: CFG) -> list[InductivenessViolation]:
    from itertools import product

    violations: list[InductivenessViolation] = []
    for label in sorted(cfg.transitions):
        src_region = inv.at(label)
        for t in cfg.transitions[label]:
            tgt_region = inv.at(t.target)
            if t.kind == "update" and not t.update.is_identity():
                rvars = sorted(t.update.rhs.variables() & set(cfg.dists))
                supports = [cfg.dists[r].support for r in rvars]
                for combo in product(*supports):
                    rhs = t.update.rhs
                    for r, (value, _) in zip(rvars, combo):
                        rhs = rhs.substitute(r, type(rhs).const_expr(value))
                    image = tuple(
                        affine_image(p, t.update.target, rhs) for p in src_region
                    )
                    if not _region_covered_by(image, tgt_region):
                        mu = ", ".join(
                            f"{r}={v}" for r, (v, _) in zip(rvars, combo)
                        )
                        violations.append(
                            InductivenessViolation(
                                label, t.target,
                                f"image of I({label}) under the update"
                                + (f" with {mu}" if mu else "")
                                + f" is not inside I({t.target})",
                            )
                        )
                        break
            else:
                region = src_region
                if t.kind == "guard":
                    region = region_intersect(src_region, t.region)
                if not _region_covered_by(region, tgt_region):
                    violations.append(
                        InductivenessViolation(
                            label, t.target,
                            f"I({label})"
                            + (" ∧ guard" if t.kind == "guard" else "")
                            + f" is not inside I({t.target})",
                        )
                    )
    return violations
