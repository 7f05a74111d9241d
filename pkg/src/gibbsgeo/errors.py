"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` subclasses to exit status 2 and
:class:`NumericalError` subclasses to exit status 3.
"""


class GibbsGeoError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GibbsGeoError, ValueError):
    """Invalid input: bad shapes, incompatible spaces, malformed configs."""


class DomainError(ValidationError):
    """A pointwise operation was applied outside its domain (e.g. log of a non-positive value)."""


class UsageError(ValidationError):
    """Operands that cannot be combined, e.g. tangent vectors at different base points."""


class ResourceError(GibbsGeoError):
    """A requested depth or grid would exceed the configured size cap."""


class NumericalError(GibbsGeoError, ArithmeticError):
    """An iterative method failed or a numerical residual is out of tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StructuralError(NumericalError):
    """The problem structure is degenerate (non-primitive matrix, rank loss, null weights)."""


class AccuracyError(NumericalError):
    """A finite-difference or integration diagnostic exceeded its tolerance."""


class ChartBoundaryError(NumericalError):
    """A point left the region where the chart is well conditioned."""
