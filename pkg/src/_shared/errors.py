class FhlError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGridError(FhlError):
    """Time grid is malformed or cannot support the requested operation."""


class InvalidInputError(FhlError):
    """Inputs are inconsistent with each other (grids, Hurst index, paths)."""


class UnsupportedParameterError(FhlError):
    """Parameter lies outside the range this package implements."""


class DomainError(FhlError):
    """Argument lies outside the mathematical domain of the operation."""


class SizeLimitError(FhlError):
    """Problem is too large for an exact solver; subsample first."""
