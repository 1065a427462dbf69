"""Exception hierarchy.

Errors split into two families so front ends can map them to exit codes:
input problems derive from :class:`ValidationError`, numerical breakdowns
from :class:`NumericalError`.
"""

from __future__ import annotations


class QuantCorrError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(QuantCorrError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(QuantCorrError, ArithmeticError):
    """A computation could not be carried out on well-formed input."""


class InvalidQuantile(ValidationError):
    pass


class InvalidSeries(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class NonPositivePrice(ValidationError):
    pass


class NonStationary(ValidationError):
    pass


class DegreesOfFreedom(ValidationError):
    pass


class RankDeficient(NumericalError):
    pass


class NonConvergence(NumericalError):
    def __init__(self, message: str, iterations: int | None = None, gap: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.gap = gap


class DegenerateWindow(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class BandwidthTooLarge(NumericalError):
    pass
