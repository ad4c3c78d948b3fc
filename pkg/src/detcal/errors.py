"""Exception hierarchy shared by all detcal modules.

Exit codes used by the CLI: 2 usage, 3 data, 4 numeric.
"""


class DetcalError(Exception):
    exit_code = 1


class UsageError(DetcalError):
    exit_code = 2


class DataError(DetcalError):
    """Invalid or inconsistent input data (files, values, manifests)."""

    exit_code = 3


class ParseError(DataError):
    """Malformed text input, with line/column provenance."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where = f" ({where})"
        super().__init__(f"{message}{where}")


class ValidationError(DataError):
    """A parsed value violates its domain invariant."""


class GeometryError(ValidationError):
    """Degenerate or out-of-range box geometry."""


class InsufficientDataError(DataError):
    """Too few samples to fit a model."""


class NumericError(DetcalError):
    """Numerical failure (singular covariance, non-positive-definite matrix)."""

    exit_code = 4
