"""Time-slotted cluster simulator with continuous-time copy completions.

M homogeneous machines execute copies of tasks. Scheduling policies run
only at slot boundaries (0, Δ, 2Δ, ...); copies complete in continuous
time inside slots. When the first copy of a task finishes, the task is
complete and every sibling copy is killed in the same instant; machines
freed mid-slot become assignable at the next boundary, because that is
the next time a policy runs. Jobs arriving mid-slot become visible at
the next boundary.

Accounting: a copy occupies its machine from its launch boundary until
it finishes, is killed, or the horizon cuts it off; a job's resource is
the configured rate γ times the summed machine-time of all its copies.
Jobs not finished by the horizon are censored: they are excluded from
per-job records but their machine-time still counts toward the total.
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import insort
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .metrics import JobMetrics, MetricsReport
from .workload import (JobSpec, WorkloadSpec, generate_workload,
                       policy_stream, workload_stream)

__all__ = [
    "ClusterConfig",
    "Launch",
    "PolicyDecision",
    "CopyState",
    "TaskRun",
    "JobRun",
    "ClusterSim",
    "run",
]

RUNNING = "running"
FINISHED = "finished"
KILLED = "killed"


@dataclass(frozen=True)
class ClusterConfig:
    """Static cluster parameters for one simulation run.

    ``machines`` is the node count M, ``gamma`` the resource cost per unit
    machine-time, ``horizon`` the simulated time span, ``seed`` the root
    seed for both the workload and policy random streams, ``slot`` the
    scheduling quantum Δ, and ``cap`` the maximum number of simultaneous
    copies any task may hold.
    """

    machines: int
    gamma: float
    horizon: float
    seed: int
    slot: float = 1.0
    cap: int = 8

    def __post_init__(self):
        if self.machines < 1:
            raise ValueError(f"machines must be >= 1, got {self.machines}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.horizon <= 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.slot <= 0.0:
            raise ValueError(f"slot must be positive, got {self.slot}")
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")


@dataclass(frozen=True)
class Launch:
    """Request to start ``copies`` new copies of one task at this boundary.

    ``machines`` optionally pins the specific machine ids to use (must be
    idle and distinct); when None the engine assigns the lowest-numbered
    idle machines. Launches carrying explicit machine ids should precede
    engine-assigned ones within a decision so the two cannot collide.
    """

    job: int
    task: int
    copies: int = 1
    machines: tuple[int, ...] | None = None


@dataclass(frozen=True)
class PolicyDecision:
    """Everything a policy asks the engine to do at one slot boundary.

    ``kills`` (job, task, copy-index) terminate running copies at the
    boundary instant, freeing their machines for this same decision's
    launches. None of the bundled policies kill; the field exists so the
    engine's copy lifecycle is fully driveable through one interface.
    """

    launches: tuple[Launch, ...] = ()
    kills: tuple[tuple[int, int, int], ...] = ()


@runtime_checkable
class Policy(Protocol):
    """A scheduling policy: called at each slot boundary, returns launches."""

    name: str

    def __call__(self, sim: "ClusterSim", now: float
                 ) -> "PolicyDecision | Sequence[Launch]":
        ...


class CopyState:
    """One running/finished/killed copy of a task."""

    __slots__ = ("job", "task", "index", "machine", "start", "duration",
                 "status", "end")

    def __init__(self, job: int, task: int, index: int, machine: int,
                 start: float, duration: float):
        self.job = job
        self.task = task
        self.index = index
        self.machine = machine
        self.start = start
        self.duration = duration
        self.status = RUNNING
        self.end: float | None = None

    @property
    def finish(self) -> float:
        """The instant this copy would complete if never killed."""
        return self.start + self.duration

    def machine_time(self) -> float:
        """Occupied machine-time; exact duration for a normally finished copy."""
        if self.status == FINISHED:
            return self.duration
        if self.end is None:
            raise RuntimeError("machine_time of a still-running copy")
        return self.end - self.start


class TaskRun:
    """Lifecycle of one task: its pre-drawn first-copy duration and copies."""

    __slots__ = ("index", "duration", "copies", "duplicated", "completed",
                 "completion")

    def __init__(self, index: int, duration: float):
        self.index = index
        self.duration = duration
        self.copies: list[CopyState] = []
        self.duplicated = False
        self.completed = False
        self.completion: float | None = None


class JobRun:
    """Mutable per-job simulation state wrapped around a JobSpec."""

    __slots__ = ("spec", "visible_at", "tasks", "next_new", "completed_count",
                 "first_slot", "finished_at", "mean", "contribs")

    def __init__(self, spec: JobSpec, visible_at: float):
        self.spec = spec
        self.visible_at = visible_at
        self.tasks = [TaskRun(j, spec.durations[j]) for j in range(spec.tasks)]
        self.next_new = 0            # tasks launch in ascending index order
        self.completed_count = 0
        self.first_slot: float | None = None
        self.finished_at: float | None = None
        self.mean = spec.law.mean()
        self.contribs: list[float] = []   # machine-time of each ended copy

    @property
    def ident(self) -> int:
        return self.spec.ident

    @property
    def started(self) -> bool:
        return self.next_new > 0

    @property
    def unlaunched(self) -> int:
        """Number of tasks that have no copy yet."""
        return self.spec.tasks - self.next_new

    @property
    def remaining_tasks(self) -> int:
        return self.spec.tasks - self.completed_count

    @property
    def remaining_workload(self) -> float:
        """Expected work still owed: unfinished task count times mean duration."""
        return self.remaining_tasks * self.mean

    @property
    def workload(self) -> float:
        return self.spec.tasks * self.mean


def _slot_index(time: float, slot: float) -> int:
    """Boundary index at or after ``time``, robust to float fuzz."""
    return max(0, math.ceil(time / slot - 1e-12))


class ClusterSim:
    """Single deterministic simulation run over a fixed job list.

    Policies interact with the engine through a small read surface:
    ``idle_count``/``idle_machines()``, ``running_singles`` (running tasks
    with exactly one copy, keyed by (job, task)), ``started_unlaunched()``
    (started jobs still holding unlaunched tasks), ``pending_sorted()``
    plus ``pending_count`` (visible jobs not yet started, ascending
    expected workload; entries may be stale — check ``job.started``), and
    ``policy_rng``. They respond with Launch requests; new tasks of a job
    must be launched in ascending task order.
    """

    def __init__(self, cfg: ClusterConfig, jobs: Sequence[JobSpec],
                 policy: Policy, policy_rng: np.random.Generator,
                 trace=None, slot_hook: Callable[["ClusterSim", float], None] | None = None):
        self.cfg = cfg
        self.policy = policy
        self.policy_rng = policy_rng
        self.trace = trace
        self.slot_hook = slot_hook
        self.now = 0.0

        arr_sorted = sorted(jobs, key=lambda s: (s.arrival, s.ident))
        self.jobs: dict[int, JobRun] = {}
        self._arrivals: list[JobRun] = []
        for spec in arr_sorted:
            run_ = JobRun(spec, _slot_index(spec.arrival, cfg.slot) * cfg.slot)
            self.jobs[spec.ident] = run_
            self._arrivals.append(run_)
        self._next_arrival = 0

        self.idle: list[int] = list(range(cfg.machines))
        self.running_count = 0
        self._heap: list[tuple[float, int, CopyState]] = []
        self._seq = 0

        # Policy-facing registries, maintained incrementally.
        self.running_singles: dict[tuple[int, int], tuple[JobRun, TaskRun]] = {}
        self._with_unlaunched: dict[int, JobRun] = {}
        self._pending: list[tuple[float, int, JobRun]] = []
        self._pending_stale = 0
        self.pending_count = 0

        self.finished_jobs = 0

    # ------------------------------------------------------------------
    # read surface for policies

    @property
    def idle_count(self) -> int:
        return len(self.idle)

    def idle_machines(self) -> list[int]:
        """Snapshot of idle machine ids, ascending."""
        return list(self.idle)

    def started_unlaunched(self) -> list[JobRun]:
        """Started, unfinished jobs that still have unlaunched tasks."""
        return list(self._with_unlaunched.values())

    def pending_sorted(self) -> list[tuple[float, int, JobRun]]:
        """Visible not-yet-started jobs as (workload, id, job), ascending.

        May contain entries whose job has started since insertion; callers
        skip those. Compacted opportunistically so stale entries never
        dominate.
        """
        if self._pending_stale > 32 and self._pending_stale * 4 > len(self._pending):
            self._pending = [e for e in self._pending if not e[2].started]
            self._pending_stale = 0
        return self._pending

    # ------------------------------------------------------------------
    # trace

    def _emit(self, time: float, event: str, job: int, task: int | None,
              copy: int | None, machine: int | None):
        if self.trace is None:
            return
        record = {"time": time, "event": event, "job": job, "task": task,
                  "copy": copy, "machine": machine}
        if hasattr(self.trace, "write"):
            self.trace.write(json.dumps(record) + "\n")
        else:
            self.trace.append(record)

    # ------------------------------------------------------------------
    # event processing

    def _process_events(self, upto: float):
        """Complete every copy whose finish instant is <= ``upto``."""
        heap = self._heap
        while heap and heap[0][0] <= upto:
            finish, _, copy = heapq.heappop(heap)
            if copy.status != RUNNING:
                continue                       # killed earlier; stale entry
            job = self.jobs[copy.job]
            task = job.tasks[copy.task]
            if task.completed:                 # lost a same-instant race
                continue
            self._complete_task(job, task, copy, finish)

    def _complete_task(self, job: JobRun, task: TaskRun, winner: CopyState,
                       when: float):
        task.completed = True
        task.completion = when
        winner.status = FINISHED
        winner.end = when
        job.contribs.append(winner.machine_time())
        self._free_machine(winner.machine)
        self._emit(when, "finish", winner.job, winner.task, winner.index,
                   winner.machine)
        for sibling in task.copies:
            if sibling is winner or sibling.status != RUNNING:
                continue
            sibling.status = KILLED
            sibling.end = when
            job.contribs.append(sibling.machine_time())
            self._free_machine(sibling.machine)
            self._emit(when, "kill", sibling.job, sibling.task, sibling.index,
                       sibling.machine)
        self.running_singles.pop((winner.job, winner.task), None)
        job.completed_count += 1
        if job.completed_count == job.spec.tasks:
            job.finished_at = when
            self.finished_jobs += 1

    def _free_machine(self, machine: int):
        insort(self.idle, machine)
        self.running_count -= 1

    # ------------------------------------------------------------------
    # arrivals

    def _admit_arrivals(self, now: float):
        while self._next_arrival < len(self._arrivals):
            job = self._arrivals[self._next_arrival]
            if job.visible_at > now + 1e-9:
                return
            self._next_arrival += 1
            self._emit(job.spec.arrival, "arrive", job.ident, None, None, None)
            insort(self._pending, (job.workload, job.ident, job))
            self.pending_count += 1

    # ------------------------------------------------------------------
    # applying decisions

    def _take_machine(self, explicit: int | None) -> int:
        if not self.idle:
            raise ValueError("launch requested with no idle machine")
        if explicit is None:
            return self.idle.pop(0)
        pos = _index_of(self.idle, explicit)
        if pos is None:
            raise ValueError(f"machine {explicit} is not idle")
        return self.idle.pop(pos)

    def _apply_kills(self, kills, now: float):
        for job_id, task_idx, copy_idx in kills:
            task = self.jobs[job_id].tasks[task_idx]
            copy = task.copies[copy_idx]
            if copy.status != RUNNING:
                raise ValueError(
                    f"kill of non-running copy {copy_idx} of task "
                    f"({job_id},{task_idx})")
            copy.status = KILLED
            copy.end = now
            self.jobs[job_id].contribs.append(copy.machine_time())
            self._free_machine(copy.machine)
            self.running_singles.pop((job_id, task_idx), None)
            self._emit(now, "kill", job_id, task_idx, copy_idx, copy.machine)

    def _apply_launches(self, launches, now: float):
        for launch in launches:
            job = self.jobs[launch.job]
            task = job.tasks[launch.task]
            n = launch.copies
            if n < 1:
                raise ValueError(f"launch with copies={n}")
            if task.completed:
                raise ValueError(
                    f"launch on completed task ({launch.job},{launch.task})")
            if len(task.copies) + n > self.cfg.cap:
                raise ValueError(
                    f"task ({launch.job},{launch.task}) would exceed the "
                    f"{self.cfg.cap}-copy cap")
            if launch.machines is not None and len(launch.machines) != n:
                raise ValueError("machines tuple length != copy count")
            if task.copies:
                if task.duplicated:
                    raise ValueError(
                        f"task ({launch.job},{launch.task}) already had its "
                        f"one duplication event")
                task.duplicated = True
                self.running_singles.pop((launch.job, launch.task), None)
            else:
                if launch.task != job.next_new:
                    raise ValueError(
                        f"job {launch.job}: new tasks must launch in order; "
                        f"expected {job.next_new}, got {launch.task}")
                was_started = job.started
                job.next_new += 1
                if not was_started:
                    job.first_slot = now
                    self.pending_count -= 1
                    self._pending_stale += 1
                    if job.unlaunched > 0:
                        self._with_unlaunched[job.ident] = job
                elif job.unlaunched == 0:
                    self._with_unlaunched.pop(job.ident, None)

            for k in range(n):
                idx = len(task.copies)
                machine = self._take_machine(
                    launch.machines[k] if launch.machines is not None else None)
                if idx == 0:
                    duration = task.duration
                else:
                    duration = float(job.spec.law.sample(self.policy_rng, 1)[0])
                copy = CopyState(launch.job, launch.task, idx, machine, now,
                                 duration)
                task.copies.append(copy)
                self._seq += 1
                heapq.heappush(self._heap, (copy.finish, self._seq, copy))
                self.running_count += 1
                self._emit(now, "launch" if idx == 0 else "duplicate",
                           launch.job, launch.task, idx, machine)
            if len(task.copies) == 1:
                self.running_singles[(launch.job, launch.task)] = (job, task)

    # ------------------------------------------------------------------
    # main loop

    def run(self) -> tuple[list[JobMetrics], int, float]:
        """Simulate to the horizon; returns (finished-job records sorted by
        job id, censored job count, censored machine-time)."""
        cfg = self.cfg
        n_slots = _slot_index(cfg.horizon, cfg.slot)
        for k in range(n_slots):
            now = k * cfg.slot
            if now >= cfg.horizon:
                break
            self.now = now
            self._process_events(now)
            self._admit_arrivals(now)
            decision = self.policy(self, now)
            if not isinstance(decision, PolicyDecision):
                decision = PolicyDecision(launches=tuple(decision))
            self._apply_kills(decision.kills, now)
            self._apply_launches(decision.launches, now)
            if len(self.idle) + self.running_count != cfg.machines:
                raise RuntimeError(
                    f"machine conservation violated at t={now}: "
                    f"{len(self.idle)} idle + {self.running_count} running "
                    f"!= {cfg.machines}")
            if self.slot_hook is not None:
                self.slot_hook(self, now)
        self._process_events(cfg.horizon)
        return self._finalize()

    def _finalize(self) -> tuple[list[JobMetrics], int, float]:
        gamma = self.cfg.gamma
        horizon = self.cfg.horizon
        records: list[JobMetrics] = []
        censored = 0
        censored_time = 0.0
        for job in self._arrivals:
            for task in job.tasks:
                for copy in task.copies:
                    if copy.status == RUNNING:     # cut off by the horizon
                        copy.end = horizon
                        copy.status = KILLED
                        job.contribs.append(copy.machine_time())
            machine_time = math.fsum(job.contribs)
            if job.finished_at is None:
                censored += 1
                censored_time += machine_time
            else:
                records.append(JobMetrics(
                    ident=job.ident,
                    arrival=job.spec.arrival,
                    finish=job.finished_at,
                    flowtime=job.finished_at - job.spec.arrival,
                    resource=gamma * machine_time,
                    tasks=job.spec.tasks,
                ))
        records.sort(key=lambda r: r.ident)
        return records, censored, gamma * censored_time


def _index_of(sorted_list: list[int], value: int) -> int | None:
    from bisect import bisect_left
    pos = bisect_left(sorted_list, value)
    if pos < len(sorted_list) and sorted_list[pos] == value:
        return pos
    return None


def run(cfg: ClusterConfig, workload: WorkloadSpec | None, policy: Policy, *,
        jobs: Sequence[JobSpec] | None = None, trace=None,
        slot_hook=None) -> MetricsReport:
    """Simulate one (config, workload, policy) cell and aggregate metrics.

    The workload is realized from the seed's workload stream unless an
    explicit ``jobs`` list is supplied (e.g. a single handcrafted job);
    policy randomness always comes from the seed's policy stream. The
    optional ``trace`` sink (a list, or a file-like object receiving
    line-delimited JSON) records arrive/launch/duplicate/finish/kill
    events.
    """
    if jobs is None:
        if workload is None:
            raise ValueError("either a WorkloadSpec or an explicit jobs list "
                             "is required")
        jobs = generate_workload(workload, cfg.horizon,
                                 workload_stream(cfg.seed))
    sim = ClusterSim(cfg, jobs, policy, policy_stream(cfg.seed), trace=trace,
                     slot_hook=slot_hook)
    records, censored, censored_resource = sim.run()
    return MetricsReport.build(records, censored, censored_resource,
                               cfg.gamma)
