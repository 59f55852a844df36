"""Exception types shared across the package."""

from __future__ import annotations


class SpecsimError(Exception):
    """Base class for package-specific failures."""


class DivergingMomentError(SpecsimError):
    """A requested moment does not exist for the given tail exponent.

    Raised instead of returning NaN or infinity so callers cannot silently
    propagate a meaningless number into a delay or resource figure.
    """


class SaturationError(SpecsimError):
    """A queueing formula was evaluated at or beyond its stability limit."""


class QuadratureError(SpecsimError):
    """Numerical integration failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float | None = None,
                 error_bound: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class ConvergenceError(SpecsimError):
    """An iterative solver hit its iteration cap before meeting tolerance.

    Carries the objective trace so callers can diagnose oscillation versus
    slow progress.
    """

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ConfigError(SpecsimError):
    """An experiment configuration failed validation.

    ``field`` names the offending entry when known, e.g. ``policies[1].name``.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
