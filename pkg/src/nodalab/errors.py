"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class ResolutionError(DomainError):
    """A grid is too coarse for the requested computation."""


class UnsupportedDegreeError(DomainError):
    """A polynomial degree exceeds the supported range."""
