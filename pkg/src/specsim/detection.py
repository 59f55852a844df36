"""Straggler detection: duplicate count and threshold for a probed task.

A task's first copy is probed once it has completed a fraction ``s`` of its
work, which takes s * t1 machine-time and reveals t1. The projected remaining
work is then (1 - s) * t1; when that is at least sigma * E[x] the task is
declared a straggler and c - 1 fresh copies race the original's remainder,
all c machines running until the first finish. The kernels here price that
scheme per task: the conditional machine-time of the race, the best integer
copy count for a given threshold, the unconditional per-task cost, and the
cost-minimizing threshold.

The threshold enters everything through bar = sigma * E[x] (the remaining
work cutoff) and b = bar / (1 - s) (the same cutoff expressed on the full
duration t1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dist import DEFAULT_QUADRATURE, ParetoDist, Quadrature, integrate
from .errors import DivergingMomentError
from .optimize import scan_then_refine

__all__ = [
    "DEFAULT_PROGRESS",
    "OptimalSigma",
    "expected_straggler_cost",
    "optimal_c",
    "expected_task_cost",
    "optimal_sigma",
]

# Work fraction at which a running copy is probed. The optimal threshold is
# provably insensitive to it, so one default serves everywhere a concrete
# value is needed.
DEFAULT_PROGRESS = 0.25


def _validate(sigma: float, s: float) -> None:
    if not sigma > 0:
        raise ValueError(f"threshold multiplier must be positive, got {sigma}")
    if not 0.0 < s < 1.0:
        raise ValueError(f"progress fraction must lie in (0, 1), got {s}")


def expected_straggler_cost(c: int, sigma: float, s: float, law: ParetoDist,
                            quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Expected machine-time of one straggler handled with c total copies.

    Conditioned on the straggler event, the remaining work of the original
    is Pareto on [sigma * E[x], inf) by the distribution's self-similarity,
    and it races c - 1 fresh copies; all c machines run until the first
    finish. The cost is c times the expected race duration,

        c * int_0^bar S(t)^(c-1) dt + (c / S(b)) * int_bar^inf G(t) dt,
        G(t) = S(t)^(c-1) * S(t / (1 - s)),

    with S the survival function, bar = sigma * E[x] and b = bar / (1 - s).
    The normalized tail term equals int_bar^inf S(t)^(c-1) (bar/t)^shape dt,
    the survival of the race minimum past the cutoff.
    """
    _validate(sigma, s)
    if c < 1:
        raise ValueError(f"copy count must be >= 1, got {c}")
    if c * law.shape <= 1.0:
        raise DivergingMomentError(
            f"race tail integral diverges: copies * shape = {c * law.shape}")

    bar = sigma * law.mean()
    b = bar / (1.0 - s)
    power = c - 1

    if power == 0:
        head = bar
    else:
        head = integrate(lambda t: law.survival(t) ** power, 0.0, bar, quad,
                         points=(law.scale,))

    big_s = law.survival(b)
    tail = integrate(
        lambda t: law.survival(t) ** power * law.survival(t / (1.0 - s)),
        bar, math.inf, quad,
        points=(law.scale, law.scale * (1.0 - s)),
        tail=law.min_law(max(c, 2)))
    return c * head + (c / big_s) * tail


def optimal_c(sigma: float, s: float, law: ParetoDist, cap: int) -> int:
    """Copy count minimizing the conditional straggler cost, ties downward."""
    if cap < 1:
        raise ValueError(f"copy cap must be >= 1, got {cap}")
    best_c, best_v = 1, math.inf
    for c in range(1, cap + 1):
        v = expected_straggler_cost(c, sigma, s, law)
        if v < best_v - 1e-12:
            best_c, best_v = c, v
    return best_c


def expected_task_cost(sigma: float, s: float, law: ParetoDist, cap: int,
                       copies: int | None = None) -> float:
    """Unconditional expected machine-time per task under the scheme.

    Non-stragglers (t1 < b) just run: they contribute E[t1; t1 < b].
    Stragglers sink s * t1 before the probe and then pay the race, so they
    contribute s * E[t1; t1 >= b] plus the conditional race cost weighted by
    the straggler probability. ``copies`` overrides the per-sigma optimal
    count when given.
    """
    _validate(sigma, s)
    if copies is None:
        copies = optimal_c(sigma, s, law, cap)
    b = sigma * law.mean() / (1.0 - s)
    big_s = law.survival(b)
    return (big_s * expected_straggler_cost(copies, sigma, s, law)
            + s * law.tail_mean(b) + law.head_mean(b))


@dataclass(frozen=True)
class OptimalSigma:
    """Threshold search result: minimizer, its cost, the copy count there,
    and whether the minimum sat on an end of the search interval."""

    sigma: float
    cost: float
    copies: int
    at_boundary: bool


def optimal_sigma(s: float, law: ParetoDist, cap: int,
                  upper: float = 10.0, tol: float = 1e-4) -> OptimalSigma:
    """Threshold minimizing the unconditional per-task cost over (1, upper].

    The objective is piecewise smooth (the integer copy count switches with
    sigma), so a coarse scan brackets the basin before golden-section
    polishes it. A minimum within ``tol`` of either end is flagged as a
    boundary solution rather than an interior optimum.
    """
    if upper <= 1.0:
        raise ValueError(f"search interval (1, {upper}] is empty")
    lo = 1.0 + 1e-6

    def cost(sig: float) -> float:
        return expected_task_cost(sig, s, law, cap)

    sig, val = scan_then_refine(cost, lo, upper, coarse=60, tol=tol)
    boundary = sig <= lo + tol or sig >= upper - tol
    return OptimalSigma(sigma=sig, cost=val,
                        copies=optimal_c(sig, s, law, cap),
                        at_boundary=boundary)
