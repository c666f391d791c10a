"""Exception hierarchy and the exit statuses the command line maps them to."""


class ExitWaveError(Exception):
    """Base class for every error raised by exit_wave.

    Subclasses also derive from the matching builtin, so callers catching
    ``ValueError`` or ``OSError`` keep working.
    """

    exit_status: int = 1


class ValidationError(ExitWaveError, ValueError):
    """Invalid arguments: non-finite samples, grid or space mismatch, bad sizes."""

    exit_status = 2


class ConfigError(ExitWaveError, ValueError):
    """Unknown, unparsable or inconsistent configuration."""

    exit_status = 2


class StorageError(ExitWaveError, OSError):
    """Field files, manifests or output directories that cannot be read or written."""

    exit_status = 3


class NumericalError(ExitWaveError, ArithmeticError):
    """A numerical safeguard tripped (realness check, Armijo failure, nondeterminism)."""

    exit_status = 4


PROBE_FAILED_STATUS = 5
NOT_CONVERGED_STATUS = 6
