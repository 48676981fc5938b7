"""Exception types raised by rmfanova."""


class DegeneracyError(ValueError):
    """Pointwise F is unbounded: positive between-condition variation with zero residual."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(k) for k in indices)


class NumericalError(ArithmeticError):
    """A numerical routine (e.g. a Cholesky factorization) failed."""


class IngestionError(ValueError):
    """Input file is malformed or does not describe a complete dataset."""
