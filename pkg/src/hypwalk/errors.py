"""Exception hierarchy shared by all modules."""


class HypwalkError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class StructuralError(HypwalkError, TypeError):
    """Operands belong to different backends or groups."""


class PrecisionError(HypwalkError, ArithmeticError):
    """A half-plane computation left the range of double precision."""

    exit_code = 3


class InsufficientResolution(HypwalkError, ValueError):
    """A boundary point is not described deeply enough for the request."""


class ResourceError(HypwalkError, MemoryError):
    """A computation would exceed its configured size cap."""

    exit_code = 3


class UnsupportedBackend(HypwalkError, NotImplementedError):
    """The operation has no implementation for this backend."""


class EstimatorFailure(HypwalkError, RuntimeError):
    """An estimator could not produce a trustworthy value.

    ``details`` carries whatever diagnostics the estimator collected.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class CollisionError(HypwalkError, RuntimeError):
    """Two distinct matrices share a canonical key during convolution."""

    exit_code = 3


class ConfigError(HypwalkError, ValueError):
    """Invalid experiment configuration; ``line`` points into the file."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
