"""Exception hierarchy and the process exit codes the CLI maps them to."""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class FlowSentryError(Exception):
    """Base class for every error raised by this package."""

    exit_code = EXIT_DATA


class ParameterError(FlowSentryError):
    """An argument or configuration value is out of its allowed range."""

    exit_code = EXIT_VALIDATION


class DataError(FlowSentryError):
    """Input data violates a precondition (empty, mislabeled, unreadable)."""


class SchemaError(DataError):
    """A required CSV column is missing."""


class ShapeError(DataError):
    """Array dimensions disagree with the declared contract."""


class InsufficientDataError(DataError):
    """Too few samples for the requested window length."""


class ModelFormatError(DataError):
    """A persisted model/threshold/scaler file is corrupt or has the wrong version."""


class NumericError(FlowSentryError):
    """Non-finite values reached a computation that requires finite input."""

    exit_code = EXIT_NUMERIC


class DivergenceError(NumericError):
    """Training loss became non-finite."""
