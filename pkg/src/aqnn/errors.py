"""Exception types shared across the package."""


class AqnnError(Exception):
    """Base class for all package-specific errors."""


class UsageError(AqnnError):
    """Bad command-line usage or invalid flag combination (exit code 1)."""


class DataError(AqnnError):
    """Malformed or inconsistent dataset input (exit code 2)."""


class DegenerateNeighborhoodError(AqnnError):
    """A neighborhood too empty to aggregate over (exit code 3)."""
