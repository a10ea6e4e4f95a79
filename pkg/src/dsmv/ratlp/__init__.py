"""Exact rational linear algebra: polyhedra, Farkas assertions, simplex LP."""

from .farkas import farkas_encode
from .polyhedron import (
    Polyhedron,
    Region,
    affine_image,
    polyhedron_includes,
    pred_to_union,
    project,
    region_contains,
    region_intersect,
    region_is_empty,
    region_true,
)
from .simplex import (
    Constraint,
    Feasible,
    Infeasible,
    LPProblem,
    LPResult,
    Unbounded,
    dump_lp,
    lp_solve,
)

__all__ = [
    "Constraint",
    "Feasible",
    "Infeasible",
    "LPProblem",
    "LPResult",
    "Polyhedron",
    "Region",
    "Unbounded",
    "affine_image",
    "dump_lp",
    "farkas_encode",
    "lp_solve",
    "polyhedron_includes",
    "pred_to_union",
    "project",
    "region_contains",
    "region_intersect",
    "region_is_empty",
    "region_true",
]
