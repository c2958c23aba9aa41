"""Exception hierarchy shared across the toolchain."""


class RedefixError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RedefixError):
    """Invalid or missing configuration."""
