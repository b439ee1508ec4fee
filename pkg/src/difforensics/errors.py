"""Exception hierarchy.

The CLI maps :class:`ParameterError` to exit status 1 and the remaining
classes to exit status 2.
"""


class DifForensicsError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DifForensicsError, ValueError):
    """Invalid parameter, range, region or configuration value."""


class ShapeError(DifForensicsError, ValueError):
    """Images whose width, height or channel count do not agree."""


class FormatError(DifForensicsError, ValueError):
    """Undecodable file, unsupported bit depth or malformed header."""


class DataError(DifForensicsError, ValueError):
    """Non-finite or out-of-range sample data."""
