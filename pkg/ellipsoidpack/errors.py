"""Exception hierarchy for ellipsoidpack."""

from typing import Optional, Sequence


class EllipsoidPackError(Exception):
    """Base class for all ellipsoidpack errors."""


class UsageError(EllipsoidPackError, ValueError):
    """Invalid arguments: dimension mismatch, bad parameter, unsupported combination."""


class DomainError(EllipsoidPackError, ValueError):
    """Input outside the mathematical domain of an operation."""

    def __init__(
        self,
        message: str,
        min_eigenvalue: Optional[float] = None,
        point: Optional[Sequence[int]] = None,
    ):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.point = tuple(point) if point is not None else None


class ResourceError(EllipsoidPackError, RuntimeError):
    """A configured resource cap was exceeded."""


class DiscretizationError(EllipsoidPackError, RuntimeError):
    """The discrete scheme could not keep a continuum guarantee."""
