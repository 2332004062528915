class ToadFrontError(Exception):
    """Base class for all package errors."""


class DomainError(ToadFrontError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class NumericError(ToadFrontError, RuntimeError):
    """A numerical procedure failed to converge or produced non-finite values."""


class ConfigError(ToadFrontError, ValueError):
    """A configuration is inconsistent or violates a stability constraint."""


class InsufficientDataError(ToadFrontError, ValueError):
    """Too few valid samples to perform a fit."""
