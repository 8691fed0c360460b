"""Exception types shared across the package.

The CLI maps these onto exit codes: ``SizeGuardError`` -> 3,
``ConvergenceError`` -> 4, any other ``ValueError`` -> 2.
"""


class SubrankError(Exception):
    """Base class for package errors."""


class DomainError(SubrankError, ValueError):
    """An argument lies outside the domain of the operation (bad mask, zero denominator)."""


class UndefinedValueError(DomainError):
    """A formula is undefined at the given input (e.g. a zero denominator)."""


class SizeGuardError(SubrankError):
    """The requested exhaustive computation exceeds its ground-set size cap."""


class ConvergenceError(SubrankError):
    """An iterative method stopped before reaching its tolerances.

    The best iterate and the solver report ride along so callers can still
    inspect them.
    """

    def __init__(self, message, result=None, report=None):
        super().__init__(message)
        self.result = result
        self.report = report
