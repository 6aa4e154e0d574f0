"""Exception and warning classes shared across the package."""


class ParameterError(ValueError):
    """(N, alpha) or another input lies outside the admissible region."""


class GridError(ValueError):
    """Grid too coarse, malformed, or fields on incompatible grids."""


class NumericalError(RuntimeError):
    """A solver or search failed; carries whatever diagnostics were collected."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class TruncationWarning(UserWarning):
    """A field does not decay at the ends of the truncated grid."""


class RegimeWarning(UserWarning):
    """Inputs are outside the regime where the underlying estimates apply."""
