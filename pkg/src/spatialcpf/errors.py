"""Exception types shared across the pipeline."""


class SpatialCpfError(Exception):
    """Base class for all pipeline errors."""


class SchemaError(SpatialCpfError):
    """Input file structure is wrong (missing column, empty file, ...)."""


class RowParseError(SpatialCpfError):
    """A single data row could not be parsed."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ParameterError(SpatialCpfError):
    """An operation was called with out-of-range parameters."""


class DataError(SpatialCpfError):
    """Input data violates an operation's preconditions."""


class DegenerateColumnError(SpatialCpfError):
    """A feature column has zero variance and cannot be standardized."""


class OutOfDomainError(SpatialCpfError):
    """A coordinate lies outside the projection's validity window."""


class InternalConsistencyError(SpatialCpfError):
    """An internal invariant was violated (indicates a bug)."""
