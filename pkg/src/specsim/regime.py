"""Light-versus-heavy load regime analysis for cluster-wide cloning.

Models each machine as an M/G/1 queue fed a ``1/machines`` split of the
task arrival stream. Two closed forms are compared:

* the expected task delay without speculation (Pollaczek-Khinchine plus
  service), and
* the expected task delay when every task runs two copies, which improves
  the service law to the minimum of two draws but doubles the load.

The cutoff is the largest load factor at which cloning still wins; beyond
it a scheduler should fall back to single copies. Both formulas need a
finite second moment, so a tail exponent of at most 2 is a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dist import ParetoDist
from .errors import SaturationError

__all__ = [
    "WorkloadProfile",
    "RegimeReport",
    "task_delay_no_spec",
    "clone_overload_check",
    "clone_delay_two_copies",
    "cutoff",
]

# Absolute tolerance of the bisection on the load factor.
_BISECT_TOL = 1e-9


@dataclass(frozen=True)
class WorkloadProfile:
    """Aggregate workload description for the regime calculation.

    ``arrival_rate`` is jobs per unit time, ``mean_tasks`` the average number
    of tasks per job, ``task_law`` the common task duration law, and
    ``machines`` the cluster size.
    """

    arrival_rate: float
    mean_tasks: float
    task_law: ParetoDist
    machines: int

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if self.mean_tasks <= 0:
            raise ValueError(f"mean_tasks must be positive, got {self.mean_tasks}")
        if self.machines < 1:
            raise ValueError(f"machines must be >= 1, got {self.machines}")

    @property
    def task_rate(self) -> float:
        """Cluster-wide task arrival rate."""
        return self.arrival_rate * self.mean_tasks

    @property
    def per_machine_rate(self) -> float:
        """Task arrival rate seen by one machine under an even split."""
        return self.task_rate / self.machines

    @property
    def load_factor(self) -> float:
        """Offered work per machine per unit time: rate times mean service."""
        return self.per_machine_rate * self.task_law.mean()


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of the cutoff computation at a given profile.

    ``delay_no_spec`` and ``delay_clone`` are evaluated at the profile's own
    load and are None where the corresponding formula is past its stability
    limit. ``boundary`` is None for an interior cutoff, "whole-interval" when
    cloning wins on the entire feasible range, and "empty" when it never wins.
    """

    omega: float
    delay_no_spec: float | None
    delay_clone: float | None
    omega_upper: float
    lambda_upper: float
    cloning_feasible: bool
    boundary: str | None = None


def _delay_no_spec_at(omega: float, law: ParetoDist) -> float:
    """No-speculation task delay as a function of the load factor."""
    if omega >= 1.0:
        raise SaturationError(
            f"per-machine utilization {omega:.4g} >= 1: queue is unstable")
    es = law.mean()
    es2 = law.second_moment()
    rate = omega / es
    return rate * es2 / (2.0 * (1.0 - omega)) + es


def _delay_clone_at(omega: float, law: ParetoDist) -> float:
    """Two-copy task delay as a function of the load factor.

    Kept in the exact published arrangement of terms; the regression tests
    pin its value, so any refactor must reproduce it bit-for-bit.
    """
    a = law.shape
    es = law.mean()
    denom = 2.0 * a - 1.0 - 4.0 * omega * (a - 1.0)
    if denom <= 0.0:
        raise SaturationError(
            f"two-copy queue saturates at load factor {omega:.4g} "
            f"(limit {(2 * a - 1) / (4 * (a - 1)):.4g})")
    numer = (omega * (a - 1.0) * (1.0 - 4.0 * a * a + 4.0 * a) / (a * (2.0 * a - 1.0))
             + 2.0 * (a - 1.0))
    return es * numer / denom


def task_delay_no_spec(profile: WorkloadProfile) -> float:
    """Expected task delay (wait plus service) without speculation."""
    return _delay_no_spec_at(profile.load_factor, profile.task_law)


def clone_overload_check(profile: WorkloadProfile) -> bool:
    """True when universal two-copy cloning leaves the cluster stable.

    The two-copy service mean is ``E[s] * 2*(shape-1)/(2*shape-1)`` and the
    task rate doubles, so stability requires
    ``rate * mean_tasks * E[s] * 4*(shape-1)/(2*shape-1) < machines``.
    """
    law = profile.task_law
    a = law.shape
    lhs = (profile.arrival_rate * profile.mean_tasks * law.mean()
           * 4.0 * (a - 1.0) / (2.0 * a - 1.0))
    return lhs < profile.machines


def clone_delay_two_copies(profile: WorkloadProfile) -> float:
    """Expected task delay when every task runs exactly two copies."""
    return _delay_clone_at(profile.load_factor, profile.task_law)


def _saturation_bound(shape: float) -> float:
    return (2.0 * shape - 1.0) / (4.0 * (shape - 1.0))


def cutoff(profile: WorkloadProfile) -> RegimeReport:
    """Largest load factor at which two-copy cloning beats no speculation.

    Bisects the sign change of (no-spec delay - clone delay) over the range
    where both formulas are defined and returns the full report, including
    the arrival rate the cutoff translates to for this profile. A finite
    second moment (shape > 2) is required.
    """
    law = profile.task_law
    law.second_moment()  # raises DivergingMomentError for shape <= 2
    es = law.mean()

    hi = min(1.0, _saturation_bound(law.shape)) - 1e-9
    lo = 1e-12

    def gap(omega: float) -> float:
        return _delay_no_spec_at(omega, law) - _delay_clone_at(omega, law)

    boundary = None
    if gap(lo) <= 0.0:
        omega_upper = 0.0
        boundary = "empty"
    elif gap(hi) > 0.0:
        omega_upper = hi
        boundary = "whole-interval"
    else:
        a, b = lo, hi
        while b - a > _BISECT_TOL:
            mid = (a + b) / 2.0
            if gap(mid) > 0.0:
                a = mid
            else:
                b = mid
        omega_upper = (a + b) / 2.0

    omega = profile.load_factor
    try:
        w_plain = _delay_no_spec_at(omega, law)
    except SaturationError:
        w_plain = None
    try:
        w_clone = _delay_clone_at(omega, law)
    except SaturationError:
        w_clone = None

    lambda_upper = omega_upper * profile.machines / (profile.mean_tasks * es)
    return RegimeReport(
        omega=omega,
        delay_no_spec=w_plain,
        delay_clone=w_clone,
        omega_upper=omega_upper,
        lambda_upper=lambda_upper,
        cloning_feasible=clone_overload_check(profile),
        boundary=boundary,
    )
