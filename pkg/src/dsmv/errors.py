"""Exception types shared across the tool."""


class DsmvError(Exception):
    """Base class for all tool-specific errors."""


class ProgramSyntaxError(DsmvError):
    """Malformed source text; carries 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class SemanticError(DsmvError):
    """Well-formed syntax with inconsistent meaning (e.g. missing dist)."""


class NonlinearError(DsmvError):
    """An expression or atom is not affine."""


class DimensionError(DsmvError):
    """Vector/matrix shape mismatch."""


class EmptyPolyhedronError(DsmvError):
    """An operation that requires a nonempty polyhedron got an empty one."""


class UnknownLabelError(DsmvError):
    """A label reference does not exist in the program/CFG."""


class UnboundedSupportError(DsmvError):
    """A sampling-variable distribution is not finite-support."""


class CoverageError(DsmvError):
    """A DSM-map lacks an entry for a required label."""


class UnsupportedFeatureError(DsmvError):
    """Input uses a feature outside the supported affine fragment."""


class MalformedDerivationError(DsmvError):
    """A derivation step references a premise that does not exist."""


class DomainError(DsmvError):
    """A numeric argument is outside the mathematical domain of the formula."""
