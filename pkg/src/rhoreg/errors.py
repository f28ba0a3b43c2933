"""Shared exception types."""


class RhoregError(Exception):
    """Base class for package errors."""


class DomainError(RhoregError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedFamilyError(RhoregError, ValueError):
    """The requested operation is not defined for this exponential family."""


class ConfigError(RhoregError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
