"""Scheduling policies for the cluster simulator.

Five policies share one interface (called at each slot boundary with the
engine and the current time, returning Launch requests):

* ``NoSpec`` — no speculation: one copy per task, jobs served in
  shortest-remaining-workload order. Control baseline.
* ``Mantri`` — duplication baseline in the style of the production
  Mantri scheduler: serve new tasks first, then duplicate the running
  single-copy tasks most likely to need it, judged by the probability
  that the remaining time exceeds twice a fresh copy's duration.
* ``Cloning`` — proactive cloning: pending jobs receive clone counts
  from the Lagrangian-dual batch optimizer whenever every pending task
  can hold a machine, otherwise single copies in SRPT order.
* ``Detect`` — straggler detection for light load: once a task has run
  a progress fraction ``s`` of its first copy, a task revealed to be a
  straggler receives duplicates on randomly chosen idle machines.
* ``Ese`` — straggler detection for heavy load: duplicates the running
  single-copy tasks with the largest estimated remaining time, then
  serves started jobs, then starts pending jobs — cloning tiny
  short-task jobs when there is slack.

All ordering rules break ties by job id then task index, so decisions
are deterministic given the policy random stream.
"""

from __future__ import annotations

import logging

import numpy as np

from .cloning import BatchJob, DualState, PendingBatch, solve_dual
from .detection import optimal_c, optimal_sigma
from .dist import ParetoDist
from .errors import ConvergenceError
from .heavy_load import small_job_clone_count
from .simulator import ClusterSim, JobRun, Launch

__all__ = [
    "NoSpec",
    "Mantri",
    "Cloning",
    "Detect",
    "Ese",
    "duplicate_probability",
    "make_policy",
    "POLICY_NAMES",
]

logger = logging.getLogger(__name__)

# Gauss-Legendre rule mapped to [0, 1] for the duplicate-probability
# integral; the integrand is smooth there so 64 nodes are ample.
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)
_NODES01 = 0.5 * (_NODES + 1.0)
_WEIGHTS01 = 0.5 * _WEIGHTS


def _dup_prob_arrays(elapsed: np.ndarray, scale: np.ndarray,
                     shape: float) -> np.ndarray:
    """P(remaining > 2 * fresh | elapsed) for Pareto(scale, shape) tasks.

    Conditioned on age ``e``, the remaining time exceeds ``u`` with
    probability (max(e, scale)/(e + u))**shape for e + u above the scale;
    averaging over a fresh draw (inverse-CDF at the quadrature nodes)
    gives the duplication trigger probability.
    """
    fresh = scale[:, None] * _NODES01[None, :] ** (-1.0 / shape)
    base = np.maximum(elapsed, scale)
    vals = (base[:, None] / (elapsed[:, None] + 2.0 * fresh)) ** shape
    return vals @ _WEIGHTS01


def duplicate_probability(elapsed, law: ParetoDist):
    """P(remaining time > 2 * fresh-copy time) given a task's age.

    Vectorized over ``elapsed``; at age 0 this reduces to
    2**(-shape) / 2 for any scale.
    """
    e = np.atleast_1d(np.asarray(elapsed, dtype=float))
    out = _dup_prob_arrays(e, np.full(e.shape, law.scale), law.shape)
    return out if np.ndim(elapsed) else float(out[0])


def _remaining_key(job: JobRun) -> tuple[float, int]:
    return (job.remaining_workload, job.ident)


def _live_pending(sim: ClusterSim) -> list[JobRun]:
    """Visible, not-yet-started jobs in ascending (workload, id) order."""
    return [job for _, _, job in sim.pending_sorted() if not job.started]


def _launch_new_tasks(jobs: list[JobRun], idle_left: int,
                      launches: list[Launch]) -> int:
    """Append single-copy launches for unlaunched tasks, in job order."""
    for job in jobs:
        if idle_left == 0:
            break
        take = min(job.unlaunched, idle_left)
        first = job.next_new
        for j in range(first, first + take):
            launches.append(Launch(job.ident, j))
        idle_left -= take
    return idle_left


class NoSpec:
    """One copy per task; jobs by shortest remaining workload."""

    name = "nospec"

    def __call__(self, sim: ClusterSim, now: float) -> list[Launch]:
        idle = sim.idle_count
        if idle == 0:
            return []
        queue = sim.started_unlaunched() + _live_pending(sim)
        queue.sort(key=_remaining_key)
        launches: list[Launch] = []
        _launch_new_tasks(queue, idle, launches)
        return launches


class Mantri:
    """Serve new tasks first; duplicate likely stragglers, two copies max.

    A running single-copy task is duplicated when the probability that
    its remaining time exceeds twice a fresh copy's duration passes
    ``delta``; leftover machines go to the highest-probability
    candidates first.
    """

    name = "mantri"

    def __init__(self, delta: float = 0.25):
        if not (0.0 < delta < 1.0):
            raise ValueError(f"delta must be in (0, 1), got {delta}")
        self.delta = delta

    def __call__(self, sim: ClusterSim, now: float) -> list[Launch]:
        idle = sim.idle_count
        if idle == 0:
            return []
        queue = sim.started_unlaunched() + _live_pending(sim)
        queue.sort(key=_remaining_key)
        launches: list[Launch] = []
        idle_left = _launch_new_tasks(queue, idle, launches)
        if idle_left == 0 or not sim.running_singles:
            return launches

        keys = sorted(sim.running_singles)
        elapsed = np.empty(len(keys))
        scales = np.empty(len(keys))
        shape = None
        for i, key in enumerate(keys):
            job, task = sim.running_singles[key]
            elapsed[i] = now - task.copies[0].start
            scales[i] = job.spec.law.scale
            if shape is None:
                shape = job.spec.law.shape
            elif shape != job.spec.law.shape:
                raise ValueError("mixed tail exponents within one run are "
                                 "not supported by the Mantri baseline")
        probs = _dup_prob_arrays(elapsed, scales, shape)
        ranked = sorted(
            ((-p, key) for p, key in zip(probs, keys) if p > self.delta))
        for _, (job_id, task_idx) in ranked[:idle_left]:
            launches.append(Launch(job_id, task_idx, 1))
        return launches


class Cloning:
    """Proactive cloning via the batch clone-count optimizer.

    Each slot: (1) started jobs' unlaunched tasks get single copies,
    fewest-remaining-workload job first; (2) if every pending task could
    hold a machine simultaneously, the dual solver picks per-job clone
    counts for the whole pending set; (3) otherwise pending jobs get
    single copies in SRPT order. A solver non-convergence logs a warning
    and falls back to single copies for that slot.
    """

    name = "cloning"

    def __init__(self, gamma: float = 0.01, cap: int = 8,
                 steps: tuple[float, float, float] = (0.2, 0.3, 0.4),
                 tolerance: float = 1e-4, max_iters: int = 10_000,
                 step_decay: str = "inv-k"):
        self.gamma = gamma
        self.cap = cap
        self.steps = steps
        self.tolerance = tolerance
        self.max_iters = max_iters
        self.step_decay = step_decay

    def __call__(self, sim: ClusterSim, now: float) -> list[Launch]:
        idle = sim.idle_count
        if idle == 0:
            return []
        launches: list[Launch] = []
        started = sorted(sim.started_unlaunched(), key=_remaining_key)
        idle_left = _launch_new_tasks(started, idle, launches)
        if idle_left == 0:
            return launches
        chi = _live_pending(sim)
        if not chi:
            return launches
        total = sum(job.spec.tasks for job in chi)
        if total < idle_left:
            if len(chi) == 1:
                job = chi[0]
                m = job.spec.tasks
                count = small_job_clone_count(
                    m, job.spec.law, self.gamma,
                    min(self.cap, idle_left // m),
                    slot=now, arrival=job.spec.arrival)
                for j in range(m):
                    launches.append(Launch(job.ident, j, count))
                return launches
            batch = PendingBatch(
                slot=now,
                available=idle_left,
                jobs=tuple(BatchJob(job.ident, job.spec.tasks,
                                    job.spec.arrival, job.spec.law)
                           for job in chi),
                cap=self.cap,
                gamma=self.gamma,
            )
            dual = DualState.initial(len(chi), steps=self.steps,
                                     tolerance=self.tolerance,
                                     max_iters=self.max_iters)
            try:
                assignment = solve_dual(batch, dual,
                                        step_decay=self.step_decay)
            except ConvergenceError:
                logger.warning(
                    "clone-count solver hit its iteration cap at t=%g; "
                    "falling back to single copies for %d pending jobs",
                    now, len(chi))
                _launch_new_tasks(chi, idle_left, launches)
            else:
                for job, count in zip(chi, assignment.rounded):
                    for j in range(job.spec.tasks):
                        launches.append(Launch(job.ident, j, int(count)))
        else:
            _launch_new_tasks(chi, idle_left, launches)
        return launches


class Detect:
    """Duplicate detected stragglers; then serve started, then new jobs.

    A task is checkable once its first copy has run a fraction
    ``progress`` of its duration; it is a straggler when the remaining
    (1 - progress) share exceeds ``sigma`` times the job's mean task
    duration. Stragglers get the kernel-optimal number of duplicates
    (one, for tail exponents >= 2) on randomly chosen idle machines.
    ``sigma`` defaults to the kernel's optimum for the job's tail
    exponent, which is scale-free, so one value serves every job of a
    workload.
    """

    name = "detect"

    def __init__(self, progress: float = 0.25, sigma: float | None = None,
                 cap: int = 8):
        if not (0.0 < progress < 1.0):
            raise ValueError(f"progress must be in (0, 1), got {progress}")
        self.progress = progress
        self.sigma = sigma
        self.cap = cap
        self._by_shape: dict[float, tuple[float, int]] = {}

    def _params(self, law: ParetoDist) -> tuple[float, int]:
        """(sigma threshold, duplicates per straggler) for a tail exponent."""
        cached = self._by_shape.get(law.shape)
        if cached is None:
            unit = ParetoDist(1.0, law.shape)
            if self.sigma is None:
                best = optimal_sigma(self.progress, unit, self.cap)
                cached = (best.sigma, max(0, best.copies - 1))
            else:
                copies = optimal_c(self.sigma, self.progress, unit, self.cap)
                cached = (self.sigma, max(0, copies - 1))
            self._by_shape[law.shape] = cached
        return cached

    def __call__(self, sim: ClusterSim, now: float) -> list[Launch]:
        if sim.idle_count == 0:
            return []
        launches: list[Launch] = []
        avail = sim.idle_machines()
        for key in sorted(sim.running_singles):
            if not avail:
                break
            job, task = sim.running_singles[key]
            sigma, dups = self._params(job.spec.law)
            if dups == 0:
                continue
            duration = task.duration
            if now - task.copies[0].start < self.progress * duration:
                continue
            if (1.0 - self.progress) * duration <= sigma * job.mean:
                continue
            take = min(dups, len(avail))
            chosen = []
            for _ in range(take):
                pos = int(sim.policy_rng.integers(len(avail)))
                chosen.append(avail.pop(pos))
            launches.append(Launch(key[0], key[1], take, tuple(chosen)))
        idle_left = len(avail)
        if idle_left:
            started = sorted(sim.started_unlaunched(), key=_remaining_key)
            idle_left = _launch_new_tasks(started, idle_left, launches)
        if idle_left:
            _launch_new_tasks(_live_pending(sim), idle_left, launches)
        return launches


class Ese:
    """Heavy-load detection: duplicate the worst estimated stragglers
    first, then serve started jobs, then start pending jobs — cloning a
    pending job only when it is tiny relative to the slack
    (task count < eta * idle / pending count) and its tasks are short
    (mean duration < xi_dur).
    """

    name = "ese"

    def __init__(self, sigma: float = 1.7, eta: float = 0.1,
                 xi_dur: float = 1.0, gamma: float = 0.01, cap: int = 8):
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = sigma
        self.eta = eta
        self.xi_dur = xi_dur
        self.gamma = gamma
        self.cap = cap

    def __call__(self, sim: ClusterSim, now: float) -> list[Launch]:
        if sim.idle_count == 0:
            return []
        launches: list[Launch] = []
        avail = sim.idle_machines()

        backlog = []
        for key, (job, task) in sim.running_singles.items():
            elapsed = now - task.copies[0].start
            estimate = job.spec.law.remaining_time(elapsed).mean()
            if estimate > self.sigma * job.mean:
                backlog.append((-estimate, key[0], key[1]))
        backlog.sort()
        for _, job_id, task_idx in backlog:
            if not avail:
                break
            pos = int(sim.policy_rng.integers(len(avail)))
            launches.append(Launch(job_id, task_idx, 1, (avail.pop(pos),)))
        idle_left = len(avail)
        if idle_left == 0:
            return launches

        started = sorted(sim.started_unlaunched(), key=_remaining_key)
        idle_left = _launch_new_tasks(started, idle_left, launches)
        if idle_left == 0:
            return launches

        chi = _live_pending(sim)
        if not chi:
            return launches
        size = len(chi)
        for job in chi:
            if idle_left == 0:
                break
            small = (job.spec.tasks < self.eta * idle_left / size
                     and job.mean < self.xi_dur)
            copies = (small_job_clone_count(job.spec.tasks, job.spec.law,
                                            self.gamma, self.cap, slot=now,
                                            arrival=job.spec.arrival)
                      if small else 1)
            for j in range(job.spec.tasks):
                if idle_left == 0:
                    break
                take = min(copies, idle_left)
                launches.append(Launch(job.ident, j, take))
                idle_left -= take
        return launches


POLICY_NAMES = ("nospec", "mantri", "cloning", "detect", "ese")


def make_policy(name: str, gamma: float, cap: int, **params):
    """Build a policy by its config name, wiring cluster-wide constants.

    ``gamma`` and ``cap`` come from the cluster config; ``params`` are
    the policy's own knobs (delta, sigma, progress, eta, xi_dur, steps,
    tolerance, max_iters, step_decay).
    """
    if name == "nospec":
        ctor = lambda: NoSpec()
    elif name == "mantri":
        ctor = lambda: Mantri(**params)
    elif name == "cloning":
        ctor = lambda: Cloning(gamma=gamma, cap=cap, **params)
    elif name == "detect":
        ctor = lambda: Detect(cap=cap, **params)
    elif name == "ese":
        ctor = lambda: Ese(gamma=gamma, cap=cap, **params)
    else:
        raise ValueError(f"unknown policy {name!r}; "
                         f"expected one of {', '.join(POLICY_NAMES)}")
    if name == "nospec" and params:
        raise ValueError(f"nospec takes no parameters, got {sorted(params)}")
    try:
        return ctor()
    except TypeError as exc:
        raise ValueError(f"bad parameters for policy {name!r}: {exc}") from None
