"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class PreconditionError(ValueError):
    """Inputs violate a stated precondition (grid too coarse, support mismatch, ...)."""


class ResolutionError(RuntimeError):
    """A quadrature or grid plan cannot reach the requested accuracy.

    Carries ``required`` (panel or mode count that would be needed) when known.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
