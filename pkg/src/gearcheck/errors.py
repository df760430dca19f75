"""Exception types shared across the package."""


class GearcheckError(Exception):
    """Base class for errors raised by this package."""


class DataError(GearcheckError):
    """Unusable input data: unreadable files, malformed values, records too short."""


class DegenerateSignalError(DataError):
    """A requested quantity is mathematically undefined for this input
    (zero RMS, zero variance, empty spectrum, zero spectral spread)."""


class ConvergenceError(GearcheckError):
    """An iterative solver exhausted its iteration budget."""
