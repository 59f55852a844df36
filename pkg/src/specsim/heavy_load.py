"""Duplication threshold tuning for a saturated cluster.

Under heavy load the scheduler cannot afford proactive clones for everyone;
instead each running task is probed once at a random moment of its life (the
asktime) and duplicated only if its remaining work still exceeds
sigma * E[x]. The kernels here evaluate the expected machine-time of one
task under that rule with the asktime uniform over the task's duration,
minimize it in sigma, and pick the clone count for the small jobs that do
still get proactive copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cloning import expected_job_duration, resource_expectation
from .dist import DEFAULT_QUADRATURE, ParetoDist, Quadrature, integrate
from .optimize import scan_then_refine

__all__ = [
    "SigmaOptimum",
    "expected_resource",
    "optimal_sigma_ese",
    "small_job_clone_count",
]


def _capped_fresh_mean_integral(law: ParetoDist, lo: float, hi: float) -> float:
    """int_lo^hi E[min(y, fresh draw)] dy, in closed form.

    E[min(y, fresh)] is y below the scale and
    (shape * scale - scale**shape * y**(1 - shape)) / (shape - 1) above it.
    """
    mu, al = law.scale, law.shape
    total = 0.0
    a = lo
    if a < mu:
        b = min(hi, mu)
        total += 0.5 * (b * b - a * a)
        a = b
    if hi > a:
        total += al * mu * (hi - a) / (al - 1.0)
        if abs(al - 2.0) < 1e-9:
            total -= mu * mu * math.log(hi / a)
        else:
            total -= mu ** al * (hi ** (2.0 - al) - a ** (2.0 - al)) / (
                (al - 1.0) * (2.0 - al))
    return total


def expected_resource(sigma: float, law: ParetoDist,
                      quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Expected machine-time of one task probed at a uniform asktime.

    A task of duration t is probed at x uniform on [0, t]. If the true
    remaining work t - x exceeds sigma * E[x] a fresh copy is launched and
    both run until the earlier finish, costing x + 2 E[min(t - x, fresh)];
    otherwise the task just runs, costing t. Tasks shorter than the cutoff
    can never trigger. Conditioning on t and substituting y = t - x turns
    the inner average into a single closed-form integral, leaving one outer
    quadrature against the duration density.
    """
    if not sigma > 0:
        raise ValueError(f"threshold multiplier must be positive, got {sigma}")
    cut = sigma * law.mean()

    def conditional(t: float) -> float:
        race = 0.5 * (t - cut) ** 2 + \
            2.0 * _capped_fresh_mean_integral(law, cut, t)
        return race / t + cut

    outer = integrate(lambda t: law.pdf(t) * conditional(t),
                      cut, math.inf, quad, points=(law.scale,), tail=law)
    return law.head_mean(cut) + outer


@dataclass(frozen=True)
class SigmaOptimum:
    """Threshold search result: minimizer, its expected machine-time, and
    whether the minimum sat on an end of the search interval."""

    sigma: float
    resource: float
    at_boundary: bool


def optimal_sigma_ese(law: ParetoDist, lower: float = 0.1,
                      upper: float = 10.0, tol: float = 1e-3) -> SigmaOptimum:
    """Threshold minimizing the per-task expected machine-time."""
    if not 0.0 < lower < upper:
        raise ValueError(f"bad search interval ({lower}, {upper}]")

    sig, val = scan_then_refine(lambda s: expected_resource(s, law),
                                lower, upper, coarse=60, tol=tol)
    boundary = sig <= lower + tol or sig >= upper - tol
    return SigmaOptimum(sigma=sig, resource=val, at_boundary=boundary)


def small_job_clone_count(m: int, law: ParetoDist, gamma: float, cap: int,
                          slot: float = 0.0, arrival: float = 0.0) -> int:
    """Clone count for a small job granted proactive copies.

    Maximizes the job's utility, minus expected flowtime minus the priced
    machine-time, over integer counts; all tasks launch at the same slot so
    the flowtime is the waiting already incurred plus the expected run.
    Ties break toward fewer copies.
    """
    if cap < 1:
        raise ValueError(f"copy cap must be >= 1, got {cap}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    wait = slot - arrival
    best_c, best_v = 1, -math.inf
    for c in range(1, cap + 1):
        v = -(expected_job_duration(m, c, law) + wait) \
            - gamma * resource_expectation(m, c, law)
        if v > best_v + 1e-12:
            best_c, best_v = c, v
    return best_c
