"""Synthetic workload generation for the cluster simulator.

Jobs arrive as a Poisson process. Each job draws an integer task count, a
mean task duration, and one true first-copy duration per task, all from a
dedicated "workload" random stream. Policies consume a separate "policy"
stream (duplicate-copy durations, tie-breaking machine choices), so the
workload realized under a given seed is identical no matter which policy
is being simulated — policy comparisons on matched seeds are paired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import ParetoDist

__all__ = [
    "WorkloadSpec",
    "JobSpec",
    "workload_stream",
    "policy_stream",
    "generate_workload",
]


@dataclass(frozen=True)
class WorkloadSpec:
    """Statistical description of the arriving jobs.

    ``rate`` is the Poisson job arrival rate (jobs per unit time; zero
    means no arrivals). Task counts are uniform integers on
    ``[tasks_low, tasks_high]``. Each job draws a mean task duration
    uniformly from ``[mean_low, mean_high]``; its tasks are i.i.d. Pareto
    with that mean and tail exponent ``shape``, so the Pareto scale is
    ``mean * (shape - 1) / shape``.
    """

    rate: float
    shape: float
    tasks_low: int = 1
    tasks_high: int = 100
    mean_low: float = 1.0
    mean_high: float = 4.0

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if self.shape <= 1.0:
            raise ValueError(
                f"shape must exceed 1 for finite mean durations, got {self.shape}")
        if not (1 <= self.tasks_low <= self.tasks_high):
            raise ValueError(
                f"task count range must satisfy 1 <= low <= high, got "
                f"[{self.tasks_low}, {self.tasks_high}]")
        if not (0.0 < self.mean_low <= self.mean_high):
            raise ValueError(
                f"mean duration range must satisfy 0 < low <= high, got "
                f"[{self.mean_low}, {self.mean_high}]")

    def job_law(self, mean: float) -> ParetoDist:
        """Task duration law for a job whose mean duration is ``mean``."""
        return ParetoDist(mean * (self.shape - 1.0) / self.shape, self.shape)


@dataclass(frozen=True)
class JobSpec:
    """One realized job: arrival instant, task count, duration law, and the
    pre-drawn true duration of every task's first copy.

    First-copy durations are fixed at generation time so that the work a
    job brings is a property of the workload, not of scheduling decisions.
    Durations of later (speculative) copies are drawn by the simulator
    from the policy stream when those copies actually launch.
    """

    ident: int
    arrival: float
    tasks: int
    law: ParetoDist
    durations: tuple[float, ...]

    def __post_init__(self):
        if len(self.durations) != self.tasks:
            raise ValueError(
                f"job {self.ident}: {self.tasks} tasks but "
                f"{len(self.durations)} pre-drawn durations")

    @property
    def workload(self) -> float:
        """Expected total work of the job: task count times mean duration."""
        return self.tasks * self.law.mean()


def workload_stream(seed: int) -> np.random.Generator:
    """Random stream that realizes the workload (arrivals, sizes, durations)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def policy_stream(seed: int) -> np.random.Generator:
    """Random stream consumed by scheduling decisions (duplicate durations,
    random machine picks). Separate from :func:`workload_stream` so policy
    choices never perturb the realized workload."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def generate_workload(spec: WorkloadSpec, horizon: float,
                      rng: np.random.Generator) -> list[JobSpec]:
    """Draw every job arriving in ``[0, horizon)``.

    Arrival gaps are exponential with rate ``spec.rate``; per job the draw
    order is fixed (gap, task count, mean duration, first-copy durations)
    so a given generator state always yields the same workload.
    """
    if horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    jobs: list[JobSpec] = []
    if spec.rate == 0.0:
        return jobs
    t = 0.0
    ident = 0
    while True:
        t += rng.exponential(1.0 / spec.rate)
        if t >= horizon:
            return jobs
        tasks = int(rng.integers(spec.tasks_low, spec.tasks_high + 1))
        mean = float(rng.uniform(spec.mean_low, spec.mean_high))
        law = spec.job_law(mean)
        durations = tuple(float(d) for d in law.sample(rng, tasks))
        jobs.append(JobSpec(ident, float(t), tasks, law, durations))
        ident += 1
