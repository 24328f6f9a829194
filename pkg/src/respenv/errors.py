"""Exception hierarchy.

ValidationError covers caller mistakes (shapes, ranges, malformed files) and
maps to CLI exit code 1; NumericalError covers failures of the numerics
themselves (singular matrices, indefinite objectives) and maps to exit code 2.
"""


class EnvelopeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EnvelopeError, ValueError):
    """Invalid user input: bad shapes, ranges, grids, or files."""


class NumericalError(EnvelopeError, ArithmeticError):
    """Numerical failure: singular or indefinite matrices, diverged fits."""
