"""Cluster scheduling simulator and optimization kernels for speculative
task execution under heavy-tailed (Pareto) workloads."""

from .dist import ParetoDist, Quadrature, RemainingTimeLaw, integrate
from .errors import (
    ConfigError,
    ConvergenceError,
    DivergingMomentError,
    QuadratureError,
    SaturationError,
    SpecsimError,
)

__version__ = "0.1.0"

__all__ = [
    "ParetoDist",
    "Quadrature",
    "RemainingTimeLaw",
    "integrate",
    "SpecsimError",
    "DivergingMomentError",
    "SaturationError",
    "QuadratureError",
    "ConvergenceError",
    "ConfigError",
    "__version__",
]
