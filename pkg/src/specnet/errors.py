"""Exception hierarchy shared by every stage of the pipeline."""


class SpecNetError(Exception):
    """Base class for all errors raised by specnet."""


class ParseError(SpecNetError, ValueError):
    """A file could not be parsed under its declared format."""


class ValidationError(SpecNetError, ValueError):
    """Data parsed fine but violates an invariant (non-finite, asymmetric...)."""


class DomainError(SpecNetError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(SpecNetError, ValueError):
    """Array dimensions do not agree."""


class DegenerateScaleError(DomainError):
    """A self-tuning bandwidth collapsed to zero."""


class IsolatedNodeError(DomainError):
    """A node has zero degree, so the normalized Laplacian is undefined."""


class NumericalError(SpecNetError, ArithmeticError):
    """Eigensolver failure, NaN loss and similar numerical breakdowns."""


class StateError(SpecNetError, RuntimeError):
    """An operation was called without the state it depends on."""


class ConfigError(SpecNetError, ValueError):
    """A run configuration is malformed or inconsistent."""
