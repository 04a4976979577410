"""Exception and warning types shared across the toolkit."""


class TazcarError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(TazcarError):
    """Malformed input data: bad graph edges, bad topology pairs, bad records."""


class DomainError(TazcarError):
    """Input is structurally valid but outside an operation's domain."""


class ConvergenceError(TazcarError):
    """An iterative procedure failed to converge within its budget."""


class McmcDivergenceError(TazcarError):
    """Sampler state became numerically unusable; carries diagnostics text."""


class ConnectivityWarning(UserWarning):
    """Graph or weight matrix is not fully connected."""


class DataWarning(UserWarning):
    """Suspicious but usable data (constant columns, pattern mismatches, ...)."""
