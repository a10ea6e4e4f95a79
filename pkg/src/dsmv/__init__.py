"""dsmv: an almost-sure-termination prover for probabilistic imperative
programs based on linear descent supermartingale maps (DSM-maps).

Per while-loop, a DSM-map is synthesized via Farkas' lemma and exact rational
LP (or checked against a supplied certificate); loops compose modularly into
a whole-program termination certificate.  A simulator and closed-form
random-walk analytics support empirical validation.
"""

from .frontend import parse_linear_predicate, parse_program

__all__ = ["parse_program", "parse_linear_predicate"]

__version__ = "0.1.0"
