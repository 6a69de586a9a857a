"""Exception types raised across the package."""


class CellhomError(Exception):
    """Base class for all package errors."""


class UnsupportedDimension(CellhomError, ValueError):
    pass


class EmptyGraph(CellhomError, ValueError):
    pass


class DanglingIdentification(CellhomError, ValueError):
    pass


class NonpositiveLengthOrWeight(CellhomError, ValueError):
    pass


class UnsupportedRegion(CellhomError, ValueError):
    pass


class UnknownCatalogId(CellhomError, KeyError):
    pass


class MissingParameter(CellhomError, KeyError):
    pass


class NonpositiveScale(CellhomError, ValueError):
    pass


class ResolutionTooSmall(CellhomError, ValueError):
    pass


class DimensionMismatch(CellhomError, ValueError):
    pass


class BallOutsideRegion(CellhomError, ValueError):
    pass


class InsufficientPairs(CellhomError, ValueError):
    pass


class ProblemTooLarge(CellhomError, ValueError):
    pass


class ConfigError(CellhomError, ValueError):
    """Raised by the command-line driver for invalid run configurations."""
