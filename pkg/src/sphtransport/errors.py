"""Exception types shared across the package."""


class SphTransportError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SphTransportError):
    """Invalid or inconsistent configuration values."""


class DataError(SphTransportError):
    """Input data violates a documented precondition (e.g. off-sphere nodes)."""


class ParseError(DataError):
    """Malformed input file."""


class NotPositiveDefiniteError(SphTransportError):
    """Cholesky factorization hit a non-positive pivot."""


class SingularMatrixError(SphTransportError):
    """LU factorization detected a (numerically) singular matrix."""
