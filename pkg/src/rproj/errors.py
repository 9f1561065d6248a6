"""Exception types shared across the package."""


class RprojError(Exception):
    """Base class for all library errors."""


class FormMismatchError(RprojError):
    pass


class DomainError(RprojError):
    """Input outside the domain where an operation is defined."""


class NoFactorizationError(RprojError):
    pass


class PreconditionError(RprojError):
    pass


class DegeneratePairError(RprojError):
    pass


class UnsupportedError(RprojError):
    pass


class SizeError(RprojError):
    pass


class ConfigError(RprojError):
    pass


class PrecisionError(RprojError):
    pass


class InternalError(RprojError):
    """A runtime verification that should be guaranteed by theory failed."""
