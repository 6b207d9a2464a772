"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from :class:`GntkError`
so callers (notably the CLI) can map failures onto exit codes: configuration
and input problems exit with 2, numerical failures with 3.
"""


class GntkError(Exception):
    """Base class for all package-specific errors."""


class IoError(GntkError):
    """A required file or directory is missing or unreadable."""


class FormatError(GntkError):
    """A file exists but its contents violate the documented format."""


class ValidationError(GntkError):
    """Inputs are structurally well-formed but semantically inconsistent."""


class NumericalError(GntkError):
    """A numerical routine failed beyond its tolerance/jitter budget."""


class CapacityError(GntkError):
    """The requested computation would exceed hard size limits."""


class DegenerateError(GntkError):
    """A statistic is undefined on this input (e.g. zero-variance targets)."""


class DivergedError(GntkError):
    """An iterative procedure produced non-finite values."""


# Exit codes used by the command line interface.
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
