"""Exception types raised across the package."""


class QuantumError(ValueError):
    """Base class for every rejection raised by qparts."""


class ValidationError(QuantumError):
    """A value violates a defining constraint (bound, normalization, positivity).

    ``residual`` carries the size of the violation when one is meaningful.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class DimensionError(QuantumError):
    """Shapes or factor dimensions do not fit together."""


class LabelError(QuantumError):
    """Unknown, duplicate or unmatched outcome labels."""
