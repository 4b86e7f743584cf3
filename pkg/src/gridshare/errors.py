"""Exception types raised across the package."""

__all__ = [
    "GridShareError",
    "CaseFormatError",
    "InvariantError",
    "DisconnectedGridError",
    "SingularMatrixError",
    "NumericalError",
    "IndefiniteMatrixError",
    "InfeasibleError",
    "DegenerateCutError",
    "DimensionError",
]


class GridShareError(Exception):
    """Base class for all package-specific errors."""


class CaseFormatError(GridShareError):
    """A case file failed to parse or is missing/mistyping a field."""


class InvariantError(GridShareError):
    """A domain-type invariant was violated; the message names the field."""


class DisconnectedGridError(InvariantError):
    """The line graph does not connect all buses."""


class SingularMatrixError(GridShareError):
    """A linear system's matrix is singular (message carries a rank estimate)."""


class NumericalError(GridShareError):
    """A solver could not maintain its pivot/residual tolerance."""


class IndefiniteMatrixError(GridShareError):
    """A quadratic objective matrix is not positive definite."""


class InfeasibleError(GridShareError):
    """A constraint set handed to a solver has no feasible point."""


class DegenerateCutError(GridShareError):
    """A cutting plane duplicates an existing halfspace within tolerance."""


class DimensionError(GridShareError):
    """A geometric routine received an unsupported or mismatched dimension."""
