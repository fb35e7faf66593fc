"""Exception types shared across the package.

Kept in one place so the CLI can map error categories onto exit codes
without importing every module.
"""


class CardlossError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(CardlossError, ValueError):
    """A scalar argument, grid, ratio or configuration value is out of range."""


class InvalidSpecError(InvalidArgumentError):
    """A dataset specification is infeasible or inconsistent."""


class SingularSimilarityError(CardlossError, ArithmeticError):
    """Every solve strategy for the weighting failed.

    Signals coincident points that were not deduplicated, or a numerically
    degenerate similarity matrix.
    """


class DivergenceError(CardlossError, RuntimeError):
    """Training produced non-finite gradients or parameters.

    When raised from a training loop, ``partial_trace`` carries the per-epoch
    records collected before the failure so callers can still persist them.
    """

    def __init__(self, message: str, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class UndefinedMetricError(CardlossError, ValueError):
    """A metric is undefined for the given input (e.g. no positive labels)."""


class CsvFormatError(CardlossError, ValueError):
    """A CSV file could not be parsed; the message names the offending line."""
