"""Exception types shared across the package.

All errors derive from SigmakLabError. The numeric ones double as
ValueError/RuntimeError so generic callers can catch the builtin types.
"""


class SigmakLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SigmakLabError, ValueError):
    """Invalid user-facing configuration (CLI flags, spec fields)."""


class PositivityError(SigmakLabError, ValueError):
    """A quantity that must stay strictly positive failed to."""

    def __init__(self, message, where=None, value=None):
        super().__init__(message)
        self.where = where
        self.value = value


class DomainError(SigmakLabError, ValueError):
    """Evaluation requested outside a field's declared domain."""


class PoleError(DomainError):
    """Evaluation at the pole of an inversion."""


class ConeDomainError(SigmakLabError, ValueError):
    """Argument left the admissible cone. Carries the offending margin."""

    def __init__(self, message, margin=None, where=None):
        super().__init__(message)
        self.margin = margin
        self.where = where


class ConeBoundaryError(SigmakLabError, RuntimeError):
    """Integration or iteration ran into the cone boundary."""

    def __init__(self, message, r=None, margin=None):
        super().__init__(message)
        self.r = r
        self.margin = margin


class StepUnderflowError(SigmakLabError, RuntimeError):
    """Adaptive step size shrank below the representable floor."""

    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class NewtonError(SigmakLabError, RuntimeError):
    """Newton iteration failed (max iterations, no admissible step, singular system)."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class PathError(SigmakLabError, RuntimeError):
    """Homotopy path could not be continued to t = 1."""

    def __init__(self, message, last_good_t=None, trace=None):
        super().__init__(message)
        self.last_good_t = last_good_t
        self.trace = trace
