"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto exit codes: DataError -> 2, ConfigError -> 3,
DegenerateDataError -> 4.
"""


class PemskitError(Exception):
    """Base class for all toolkit errors."""


class DataError(PemskitError):
    """Input files or cell values are missing, malformed, or unreadable."""


class ConfigError(PemskitError):
    """A requested configuration is invalid (bad fractions, empty year set, ...)."""


class DegenerateDataError(PemskitError):
    """The data is numerically degenerate for the requested operation
    (zero-variance column, partition too small, non-convergence)."""
