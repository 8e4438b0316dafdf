"""Exception types raised across the package."""


class BevDetError(Exception):
    """Base class for all package errors."""


class InvalidDepthError(BevDetError, ValueError):
    pass


class InvalidParameterError(BevDetError, ValueError):
    pass


class InvalidInputError(BevDetError, ValueError):
    pass


class ConfigError(BevDetError, ValueError):
    pass


class SchemaError(BevDetError, ValueError):
    pass


class GenerationError(BevDetError, RuntimeError):
    pass
