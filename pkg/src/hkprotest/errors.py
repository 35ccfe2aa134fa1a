"""Exception hierarchy shared across the package.

Two families matter for the CLI exit-code contract: ``DataError`` (malformed
or inconsistent inputs, exit code 2) and ``EstimationError`` (a statistical
operation cannot proceed, exit code 3).
"""


class HkprotestError(Exception):
    """Base class for all package-specific errors."""


class DataError(HkprotestError):
    """Input files or records are malformed or inconsistent."""


class EstimationError(HkprotestError):
    """An estimation step cannot be carried out on the given data."""


class SchemaViolation(DataError):
    """A CSV file breaks its declared schema (missing column, bad type...)."""

    def __init__(self, path, message, row=None):
        self.path = str(path)
        self.row = row
        where = self.path if row is None else f"{self.path}:{row}"
        super().__init__(f"{where}: {message}")


class CalendarMismatch(DataError):
    """A dated record does not land on a known trading day."""


class EventAfterWindow(DataError):
    """A protest event is dated after the final trading day of the window."""


class UnrecognizedPhrase(DataError):
    """A textual head-count descriptor is not in the fixed phrase table."""

    def __init__(self, phrase):
        self.phrase = phrase
        super().__init__(f"unrecognized head-count phrase: {phrase!r}")


class DateAfterWindow(DataError):
    """An event date cannot be anchored because it falls after the window."""


class RankDeficient(EstimationError):
    """A design column is a linear combination of the others."""

    def __init__(self, labels, message=None):
        if isinstance(labels, str):
            labels = (labels,)
        self.labels = tuple(labels)
        super().__init__(message or f"rank-deficient design, offending column(s): {', '.join(self.labels)}")


class InsufficientObservations(EstimationError):
    """Too few observations for positive residual degrees of freedom."""


class DegenerateSeries(EstimationError):
    """A series is constant or too short to standardize."""


class WindowOutOfRange(EstimationError):
    """A CAR window does not overlap the available day range."""


class EmptyPeriod(EstimationError):
    """A period filter left no usable panel rows."""


class EmptySpecification(EstimationError):
    """A model specification declares no regressors to estimate."""
