"""Exception types shared across the library."""


class GlcError(Exception):
    """Base class for all library-specific errors."""


class UncoveredScopeError(GlcError):
    """An assignment or scope argument does not cover the required variables."""


class TooLargeError(GlcError):
    """A size guard (enumeration, elimination width, perimeter sweep) was exceeded."""


class NotACavityRegionError(GlcError):
    """A requested variable subset is not connected through shared factors."""


class DegenerateTableError(GlcError):
    """A table that must be normalizable or strictly positive is not."""


class ConstructionError(GlcError):
    """A structural precondition (coverage, partition, arity bound) is violated."""
