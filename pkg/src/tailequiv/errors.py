"""Exception hierarchy shared across the package."""


class TailEquivError(Exception):
    """Base class for all package errors."""


class ParameterError(TailEquivError, ValueError):
    """An argument lies outside its admissible range."""


class DataError(TailEquivError, ValueError):
    """Input data is malformed (non-positive prices, ragged CSVs, ...)."""


class NumericalError(TailEquivError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateError(NumericalError):
    """The estimator is undefined for this input (e.g. zero Hill log-sum)."""


class ExcludedPairError(ParameterError):
    """Equal tail orders with (lambda1, lambda2) = (0, 0) or (inf, inf)."""


class EmptyIntervalError(ParameterError):
    """No admissible epsilon exists for the threshold schedule."""
