"""Exception taxonomy shared across the package."""


class HalfspaceUstatsError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HalfspaceUstatsError):
    """Malformed arguments: non-finite coordinates, duplicate tuple points."""


class GeometryError(HalfspaceUstatsError):
    """Body violates a geometric precondition (e.g. not rotund at the
    support point: non-positive reduced Hessian eigenvalue)."""


class NumericError(HalfspaceUstatsError):
    """An optimizer or quadrature failed to converge; carries a residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StateError(HalfspaceUstatsError):
    """Object used before required setup (e.g. unnormalized density)."""


class ClassificationError(HalfspaceUstatsError):
    """A sequence limit could not be classified; user override needed."""


class EfficiencyError(HalfspaceUstatsError):
    """Rejection sampling acceptance rate collapsed below the floor."""


class BudgetExceededError(HalfspaceUstatsError):
    """Tuple enumeration would exceed the configured budget."""


class ConfigError(HalfspaceUstatsError):
    """Invalid experiment configuration; message names the field."""


class DependencyError(HalfspaceUstatsError):
    """A required precomputed component is missing."""


class DegenerateError(HalfspaceUstatsError):
    """A variance or scale needed for normalization is zero."""
