"""Exception hierarchy shared across the package.

Every error raised on purpose derives from CrofError so the CLI can map
failure categories to distinct exit codes.
"""


class CrofError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class StorageError(CrofError):
    """I/O failure while reading or writing an artifact file."""

    exit_code = 3


class FormatError(CrofError):
    """File content violates the expected binary or text format."""

    exit_code = 4


class ShapeError(CrofError):
    """Array dimensions inconsistent with the operation's contract."""

    exit_code = 5


class ConfigError(CrofError):
    """Invalid hyperparameter, flag, or config-file value."""

    exit_code = 6


class DegenerateInputError(CrofError):
    """Numerically degenerate input (zero-norm vector, NaN payload, ...)."""

    exit_code = 7
