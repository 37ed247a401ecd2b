"""Exception types raised across the package."""


class HedonicError(Exception):
    """Base class for every error raised by hedonic_esg."""


class SchemaError(HedonicError, ValueError):
    """Input table is missing a required column or has an unknown layout."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ParseError(HedonicError, ValueError):
    """A cell could not be parsed as a number."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(HedonicError, ValueError):
    """Data parsed fine but violates a domain invariant."""


class InsufficientDataError(HedonicError, ValueError):
    """Series too short for the requested operation."""


class DegenerateInputError(HedonicError, ValueError):
    """Input has no variation where variation is required."""


class DivisionByZero(HedonicError, ZeroDivisionError):
    """A level used as a return denominator is zero.

    ``year`` is the calendar year of the offending level when known, otherwise
    its position in the series.
    """

    def __init__(self, message, year=None, index=None):
        super().__init__(message)
        self.year = year
        self.index = index


class CollinearityError(HedonicError, ValueError):
    """Design matrix is rank deficient; ``columns`` names the dependent ones."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class NonConvergence(HedonicError, RuntimeError):
    """Optimizer exhausted its budget; ``fit`` carries the best result found."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class DomainError(HedonicError, ValueError):
    """Argument outside the mathematical domain of a function."""
