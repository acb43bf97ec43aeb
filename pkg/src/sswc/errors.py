"""Exception classes shared across the package."""


class SSWCError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SSWCError, ValueError):
    """An argument violates an operation's precondition."""


class GeoreferenceError(SSWCError):
    """Missing or unusable georeferencing (e.g. no world file)."""


class DecodeError(SSWCError):
    """An image file could not be decoded."""


class OutOfBoundsError(SSWCError, IndexError):
    """A world coordinate falls outside the raster it is sampled from."""


class FormatError(SSWCError, ValueError):
    """A document (CSV, GeoJSON, config) could not be parsed or validated.

    ``context`` carries the line number or record index of the offending item.
    """

    def __init__(self, message, context=None):
        if context is not None:
            message = f"{context}: {message}"
        super().__init__(message)
        self.context = context


class InsufficientDataError(SSWCError, ValueError):
    """Too few observations for the requested statistic."""


class UndefinedOrientationError(SSWCError, ValueError):
    """Row orientation cannot be estimated (empty mask)."""


class ConfigError(SSWCError, ValueError):
    """Invalid run configuration."""
