"""Pareto distribution toolkit and the quadrature helper used by the kernels.

Task durations are modeled as Pareto random variables: survival
``P(x > t) = (scale / t) ** shape`` for ``t >= scale``. Two facts carry most
of the analysis in this package and are exposed directly:

* the minimum of ``k`` independent copies is again Pareto with the same
  scale and ``k`` times the shape, and
* conditioned on exceeding an elapsed time ``e >= scale``, a duration is
  Pareto with scale ``e`` and the original shape, so the expected remaining
  work grows linearly in ``e``.

Moments that do not exist for the given shape raise
:class:`~specsim.errors.DivergingMomentError` rather than returning NaN.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _sp_integrate

from .errors import DivergingMomentError, QuadratureError

log = logging.getLogger(__name__)

__all__ = [
    "ParetoDist",
    "RemainingTimeLaw",
    "Quadrature",
    "DEFAULT_QUADRATURE",
    "integrate",
]


@dataclass(frozen=True)
class Quadrature:
    """Settings for adaptive numerical integration.

    ``tail_cutoff`` is the quantile of a dominating distribution at which an
    improper integral is truncated when the substitution route fails;
    truncation logs the implied error bound.
    """

    rel_tol: float = 1e-8
    tail_cutoff: float = 1.0 - 1e-9
    max_subdivisions: int = 200

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if not 0 < self.tail_cutoff < 1:
            raise ValueError(
                f"tail_cutoff must be in (0, 1), got {self.tail_cutoff}")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions must be at least 10")


DEFAULT_QUADRATURE = Quadrature()


@dataclass(frozen=True)
class ParetoDist:
    """Pareto law with ``scale > 0`` and tail exponent ``shape > 1``.

    ``shape > 1`` guarantees a finite mean; individual moments still check
    their own existence conditions.
    """

    scale: float
    shape: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.shape > 1:
            raise ValueError(
                f"shape must exceed 1 for a finite mean, got {self.shape}")

    def cdf(self, t):
        """P(x <= t); zero below the scale."""
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.scale, 1.0 - (self.scale / np.maximum(t, self.scale)) ** self.shape, 0.0)
        return out if out.ndim else float(out)

    def survival(self, t):
        """P(x > t) = (scale/t)**shape above the scale, 1 below it."""
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.scale, (self.scale / np.maximum(t, self.scale)) ** self.shape, 1.0)
        return out if out.ndim else float(out)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        dens = self.shape * self.scale ** self.shape / np.maximum(t, self.scale) ** (self.shape + 1.0)
        out = np.where(t >= self.scale, dens, 0.0)
        return out if out.ndim else float(out)

    def quantile(self, p: float) -> float:
        """Inverse CDF for p in [0, 1)."""
        if not 0 <= p < 1:
            raise ValueError(f"quantile needs p in [0, 1), got {p}")
        return self.scale * (1.0 - p) ** (-1.0 / self.shape)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw by inverse-CDF from ``rng``; u = 0 maps to the scale."""
        u = rng.random(size)
        return self.scale * (1.0 - u) ** (-1.0 / self.shape)

    def mean(self) -> float:
        return self.scale * self.shape / (self.shape - 1.0)

    def second_moment(self) -> float:
        """E[x^2]; exists only for shape > 2."""
        if self.shape <= 2.0:
            raise DivergingMomentError(
                f"second moment diverges for shape {self.shape} <= 2")
        return self.scale ** 2 * self.shape / (self.shape - 2.0)

    def min_law(self, k: float) -> "ParetoDist":
        """Law of the minimum of ``k`` independent copies: shape scales by k.

        ``k`` may be fractional; the result is a valid Pareto law whenever
        ``k * shape > 1``.
        """
        if k <= 0:
            raise ValueError(f"copy count must be positive, got {k}")
        if k * self.shape <= 1.0:
            raise DivergingMomentError(
                f"mean of the minimum diverges: k*shape = {k * self.shape} <= 1")
        return ParetoDist(self.scale, k * self.shape)

    def expected_min(self, k: int) -> float:
        """E[min of k independent copies] = scale*k*shape/(k*shape - 1)."""
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError(f"copy count must be an integer >= 1, got {k!r}")
        return self.min_law(int(k)).mean()

    def remaining_time(self, elapsed: float) -> "RemainingTimeLaw":
        """Law of the remaining duration after ``elapsed`` units of running.

        For ``elapsed >= scale`` the conditional law of the total duration is
        Pareto(elapsed, shape), so the remaining time has expectation
        ``elapsed / (shape - 1)``. Below the scale no conditioning has any
        effect and the law is the base law shifted left.
        """
        if elapsed < 0:
            raise ValueError(f"elapsed must be nonnegative, got {elapsed}")
        base = ParetoDist(max(elapsed, self.scale), self.shape)
        return RemainingTimeLaw(base=base, shift=elapsed)

    def tail_mean(self, b: float) -> float:
        """E[x * 1{x > b}], the mean mass above ``b``."""
        if b <= self.scale:
            return self.mean()
        return b * (self.scale / b) ** self.shape * self.shape / (self.shape - 1.0)

    def head_mean(self, b: float) -> float:
        """E[x * 1{x <= b}]."""
        return self.mean() - self.tail_mean(b)


@dataclass(frozen=True)
class RemainingTimeLaw:
    """Distribution of (total duration - shift) given total > shift.

    ``base`` is the conditional law of the total duration and ``shift`` the
    elapsed time subtracted from it.
    """

    base: ParetoDist
    shift: float

    def mean(self) -> float:
        return self.base.mean() - self.shift

    def survival(self, t):
        """P(remaining > t) for t >= 0."""
        return self.base.survival(np.asarray(t, dtype=float) + self.shift)

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def sample(self, rng: np.random.Generator, size=None):
        return self.base.sample(rng, size) - self.shift


def _quad_piece(f: Callable[[float], float], a: float, b: float,
                q: Quadrature) -> tuple[float, float, bool]:
    """One scipy adaptive pass over [a, b]; returns (value, err, clean)."""
    out = _sp_integrate.quad(
        f, a, b, epsabs=1e-12, epsrel=q.rel_tol,
        limit=q.max_subdivisions, full_output=1)
    value, abserr = out[0], out[1]
    clean = len(out) < 4  # a 4th element is scipy's warning message
    return value, abserr, clean


def integrate(f: Callable[[float], float], lo: float, hi: float,
              quad: Quadrature = DEFAULT_QUADRATURE, *,
              points: Sequence[float] = (),
              tail: ParetoDist | None = None) -> float:
    """Adaptive quadrature of ``f`` over [lo, hi], ``hi`` may be infinite.

    ``points`` lists known kinks (for instance a distribution's scale) at
    which the interval is split. An infinite upper limit is handled by
    scipy's variable substitution; if that fails and ``tail`` is given, the
    integral is truncated at the ``tail_cutoff`` quantile of ``tail`` and the
    implied truncation bound is logged.

    Raises :class:`QuadratureError` when the accumulated error estimate
    exceeds the relative tolerance.
    """
    if hi <= lo:
        if hi == lo:
            return 0.0
        raise ValueError(f"empty integration range [{lo}, {hi}]")

    cuts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *cuts, hi]

    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if math.isinf(b):
            value, abserr, clean = _quad_piece(f, a, b, quad)
            if not clean and tail is not None:
                t_cut = tail.quantile(quad.tail_cutoff)
                t_cut = max(t_cut, a * 2.0)
                bound = abs(f(t_cut)) * t_cut / max(tail.shape - 1.0, 1e-12)
                log.warning(
                    "improper integral truncated at %.6g "
                    "(tail quantile %.3g, error bound %.3g)",
                    t_cut, quad.tail_cutoff, bound)
                value, abserr, clean = _quad_piece(f, a, t_cut, quad)
                abserr += bound
        else:
            value, abserr, clean = _quad_piece(f, a, b, quad)
        if not clean:
            raise QuadratureError(
                f"quadrature did not converge on [{a}, {b}]",
                estimate=value, error_bound=abserr)
        total += value
        err += abserr

    floor = 1e-12
    if err > quad.rel_tol * max(abs(total), 1.0) + floor:
        raise QuadratureError(
            f"quadrature error estimate {err:.3g} exceeds tolerance "
            f"for integral value {total:.6g}", estimate=total, error_bound=err)
    return total
