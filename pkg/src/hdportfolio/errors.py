"""Exception types raised across the package.

Every error signalling a statistical or numerical degeneracy derives from
:class:`HDPortfolioError` so callers can catch the whole family, while data
ingestion problems carry enough location detail to be actionable.
"""

from __future__ import annotations


class HDPortfolioError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(HDPortfolioError):
    """A matrix expected to be symmetric positive definite failed factorization.

    The typical cause is a sample covariance computed from fewer observations
    than assets, which is singular by construction.
    """


class DegenerateSlope(HDPortfolioError):
    """The estimated frontier slope is too close to zero to divide by."""


class ZeroDenominator(HDPortfolioError):
    """A shrinkage-intensity or variance denominator vanished."""


class ZeroDirection(HDPortfolioError):
    """Sample and target weights coincide, leaving no shrinkage direction."""


class SingularMidMatrix(HDPortfolioError):
    """The k-by-k matrix inside a quadratic-form statistic is not invertible."""


class NegativeVariance(HDPortfolioError):
    """A variance formula produced a materially negative number."""


class NormViolation(HDPortfolioError):
    """An input vector that must have unit Euclidean norm does not."""


class ParseError(HDPortfolioError):
    """A returns file could not be parsed; the message carries row/column."""


class MissingDataError(HDPortfolioError):
    """A returns file contains missing cells.

    The offending locations are available as ``cells``, a list of
    ``(row_index, column_name)`` pairs (row indices refer to data rows,
    zero-based, excluding the header).
    """

    def __init__(self, message: str, cells: list[tuple[int, str]] | None = None):
        super().__init__(message)
        self.cells = list(cells or [])


class InsufficientAssets(HDPortfolioError):
    """Fewer complete asset columns are available than requested."""
