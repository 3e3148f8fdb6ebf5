"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so raising the right class matters:
ConfigError -> 2, DataError (and subclasses) -> 3, CompatibilityError -> 4.
"""


class ManeuverRecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ManeuverRecError):
    """Invalid or inconsistent configuration values."""


class DataError(ManeuverRecError):
    """Input data violates the schema or an invariant."""


class SchemaError(DataError):
    """A required column or field is missing or misnamed."""


class ParseError(DataError):
    """A cell could not be parsed or holds an inadmissible value."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class OrderingError(DataError):
    """Timestamps are not strictly increasing."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class CompatibilityError(ManeuverRecError):
    """Persisted artifact does not match the expected version or dimensions."""
