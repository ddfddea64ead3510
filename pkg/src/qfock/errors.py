"""Exception hierarchy shared by every module."""


class QFockError(Exception):
    """Base class for all package errors."""


class DomainError(QFockError, ValueError):
    """An argument lies outside the domain of an operation."""


class SizeError(QFockError):
    """A requested basis or block exceeds the configured size budget."""


class TruncationError(QFockError):
    """A computation would need degrees above the truncation level."""


class ConsistencyError(QFockError):
    """An internal self-check disagreed beyond tolerance."""


class PreconditionError(QFockError):
    """Inputs violate a documented precondition."""


class DegeneracyError(QFockError):
    """A matrix expected to be nonsingular (or full rank) is not."""


class UnsupportedModeError(QFockError):
    """The requested mode does not apply to the given model."""


class CacheError(QFockError):
    """A cache file is malformed or does not match its key."""
