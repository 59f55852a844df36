"""Engine-semantics tests: slotting, copy lifecycle, accounting, determinism.

Scenarios are scripted with handcrafted jobs (explicit first-copy durations)
and a slot-indexed scripted policy, so every assertion pins an exact engine
behavior rather than a statistical tendency.
"""

import io
import json
import math

import pytest

from specsim.dist import ParetoDist
from specsim.metrics import MetricsReport
from specsim.policies import Mantri, NoSpec, make_policy
from specsim.simulator import (
    ClusterConfig,
    ClusterSim,
    Launch,
    PolicyDecision,
    run,
)
from specsim.workload import (JobSpec, WorkloadSpec, generate_workload,
                              policy_stream, workload_stream)

LAW = ParetoDist(1.0, 2.0)          # mean 2


def job(ident, arrival, durations, law=LAW):
    return JobSpec(ident=ident, arrival=float(arrival), tasks=len(durations),
                   law=law, durations=tuple(float(d) for d in durations))


def config(machines=4, gamma=0.5, horizon=50.0, seed=7, slot=1.0, cap=8):
    return ClusterConfig(machines=machines, gamma=gamma, horizon=horizon,
                         seed=seed, slot=slot, cap=cap)


class Script:
    """Policy issuing a fixed decision per slot index; empty otherwise."""

    name = "script"

    def __init__(self, program):
        self.program = dict(program)

    def __call__(self, sim, now):
        return self.program.get(int(round(now / sim.cfg.slot)), ())


class Probe:
    """NoSpec plus a per-slot observation callback."""

    name = "probe"

    def __init__(self, observe):
        self.inner = NoSpec()
        self.observe = observe

    def __call__(self, sim, now):
        self.observe(sim, now)
        return self.inner(sim, now)


def test_config_validation():
    for bad in [dict(machines=0), dict(gamma=-1.0), dict(horizon=0.0),
                dict(slot=0.0), dict(cap=0)]:
        with pytest.raises(ValueError):
            config(**bad)


def test_single_task_flowtime_is_duration_plus_alignment():
    # Arrival 0.3 becomes visible at the next boundary (1.0); the only task
    # then runs start-to-finish, so flow = alignment gap + duration.
    rep = run(config(machines=2, gamma=0.5), None, NoSpec(),
              jobs=[job(0, 0.3, [2.5])])
    (rec,) = rep.jobs
    assert rec.finish == pytest.approx(1.0 + 2.5)
    assert rec.flowtime == pytest.approx(0.7 + 2.5)
    assert rec.flowtime - 2.5 < 1.0            # alignment delay < one slot
    assert rec.resource == pytest.approx(0.5 * 2.5)
    assert rep.censored == 0


def test_midslot_free_machine_assignable_next_boundary():
    # One machine: first job's task ends at 0.5 but the second job cannot
    # start until the next boundary at 1.0.
    trace = []
    rep = run(config(machines=1), None, NoSpec(),
              jobs=[job(0, 0.0, [0.5]), job(1, 0.0, [2.0])], trace=trace)
    starts = {r["job"]: r["time"] for r in trace if r["event"] == "launch"}
    assert starts[0] == 0.0
    assert starts[1] == 1.0
    by_id = {r.ident: r for r in rep.jobs}
    assert by_id[1].finish == pytest.approx(3.0)


def test_midslot_arrival_visible_next_boundary():
    seen = {}

    def observe(sim, now):
        seen[now] = sim.pending_count

    run(config(machines=2), None, Probe(observe), jobs=[job(0, 0.3, [1.0])])
    assert seen[0.0] == 0
    assert seen[1.0] == 1


def test_boundary_arrival_visible_immediately():
    trace = []
    run(config(machines=2), None, NoSpec(), jobs=[job(0, 0.0, [1.0])],
        trace=trace)
    starts = [r for r in trace if r["event"] == "launch"]
    assert starts[0]["time"] == 0.0


def test_first_finish_kills_siblings_and_null_sibling_resource():
    # Three copies race from t=0; the task completes at the earliest copy
    # finish, and every loser is killed at that same instant, so machine
    # time is exactly 3 x completion.
    trace = []
    cfg = config(machines=3, gamma=1.0, horizon=100.0)
    rep = run(cfg, None, Script({0: [Launch(0, 0, copies=3)]}),
              jobs=[job(0, 0.0, [5.0])], trace=trace)
    (rec,) = rep.jobs
    finishes = [r for r in trace if r["event"] == "finish"]
    kills = [r for r in trace if r["event"] == "kill"]
    assert len(finishes) == 1 and len(kills) == 2
    t_done = finishes[0]["time"]
    assert rec.finish == t_done
    assert all(k["time"] == t_done for k in kills)
    assert {finishes[0]["copy"], *(k["copy"] for k in kills)} == {0, 1, 2}
    assert rec.resource == pytest.approx(3.0 * t_done)


def test_winner_resource_is_exact_duration():
    # A finished copy contributes exactly its drawn duration even when the
    # completion instant is reconstructed through float slot arithmetic.
    durations = [0.1 + 0.2, 1.7, 2.4000000000000004]
    cfg = config(machines=3, gamma=1.0, horizon=50.0)
    rep = run(cfg, None, NoSpec(), jobs=[job(0, 0.0, durations)])
    (rec,) = rep.jobs
    assert rec.resource == math.fsum(durations)


def test_task_never_duplicates_twice():
    script = Script({0: [Launch(0, 0)], 1: [Launch(0, 0)], 2: [Launch(0, 0)]})
    with pytest.raises(ValueError, match="one duplication event"):
        run(config(machines=3), None, script, jobs=[job(0, 0.0, [50.0])])


def test_copy_cap_enforced():
    script = Script({0: [Launch(0, 0, copies=3)]})
    with pytest.raises(ValueError, match="copy cap"):
        run(config(machines=4, cap=2), None, script, jobs=[job(0, 0.0, [9.0])])


def test_duplication_obeys_cap_across_events():
    # cap 3: first launch takes 2 copies, the one duplication event may add
    # only 1 more.
    script = Script({0: [Launch(0, 0, copies=2)], 1: [Launch(0, 0, copies=2)]})
    with pytest.raises(ValueError, match="copy cap"):
        run(config(machines=5, cap=3), None, script, jobs=[job(0, 0.0, [9.0])])


def test_new_tasks_launch_in_ascending_order():
    script = Script({0: [Launch(0, 1)]})
    with pytest.raises(ValueError, match="in order"):
        run(config(machines=2), None, script, jobs=[job(0, 0.0, [3.0, 3.0])])


def test_launch_without_idle_machine_rejected():
    script = Script({0: [Launch(0, 0), Launch(0, 1)]})
    with pytest.raises(ValueError, match="no idle machine"):
        run(config(machines=1), None, script, jobs=[job(0, 0.0, [3.0, 3.0])])


def test_launch_on_completed_task_rejected():
    script = Script({0: [Launch(0, 0)], 2: [Launch(0, 0)]})
    with pytest.raises(ValueError, match="completed task"):
        run(config(machines=2), None, script, jobs=[job(0, 0.0, [1.0])])


def test_explicit_machine_pinning():
    trace = []
    script = Script({0: [Launch(0, 0, machines=(3,))]})
    run(config(machines=5), None, script, jobs=[job(0, 0.0, [1.0])],
        trace=trace)
    launch = next(r for r in trace if r["event"] == "launch")
    assert launch["machine"] == 3


def test_explicit_machine_must_be_idle():
    script = Script({0: [Launch(0, 0, machines=(2,))],
                     1: [Launch(0, 1, machines=(2,))]})
    with pytest.raises(ValueError, match="not idle"):
        run(config(machines=4), None, script, jobs=[job(0, 0.0, [9.0, 9.0])])


def test_machines_tuple_length_must_match_copies():
    script = Script({0: [Launch(0, 0, copies=2, machines=(1,))]})
    with pytest.raises(ValueError, match="length"):
        run(config(machines=4), None, script, jobs=[job(0, 0.0, [9.0])])


def test_policy_kill_frees_machine_for_same_decision():
    # Kill the only running copy and relaunch the task on the freed machine
    # within one decision; the relaunch is the task's duplication event and
    # draws a fresh duration from the policy stream.
    cfg = config(machines=1, gamma=1.0, horizon=400.0, seed=13)
    script = Script({0: [Launch(0, 0)],
                     2: PolicyDecision(kills=((0, 0, 0),),
                                       launches=(Launch(0, 0),))})
    rep = run(cfg, None, script, jobs=[job(0, 0.0, [100.0])])
    redraw = float(LAW.sample(policy_stream(13), 1)[0])
    (rec,) = rep.jobs
    assert rec.finish == pytest.approx(2.0 + redraw)
    assert rec.resource == pytest.approx(2.0 + redraw)   # 2 wasted + rerun


def test_kill_of_non_running_copy_rejected():
    script = Script({0: [Launch(0, 0)],
                     3: PolicyDecision(kills=((0, 0, 0),))})
    with pytest.raises(ValueError, match="non-running"):
        run(config(machines=1), None, script, jobs=[job(0, 0.0, [1.5])])


def test_zero_idle_machines_reported_to_policy():
    seen = {}

    def observe(sim, now):
        seen[now] = sim.idle_count

    run(config(machines=1), None, Probe(observe),
        jobs=[job(0, 0.0, [5.5]), job(1, 0.0, [5.5])])
    assert seen[0.0] == 1
    assert seen[1.0] == 0          # the single machine is running job 0
    assert seen[3.0] == 0


def test_machine_conservation_every_slot():
    checks = []

    def observe(sim, now):
        checks.append(sim.idle_count + sim.running_count == sim.cfg.machines)

    run(config(machines=5, horizon=80.0, seed=3),
        WorkloadSpec(rate=0.4, shape=2.0), Probe(observe))
    assert checks and all(checks)


def test_nospec_resource_identity_exact():
    # Under NoSpec every copy is a task's only copy and runs to completion,
    # so total resource equals gamma times the summed drawn durations.
    wl = WorkloadSpec(rate=0.5, shape=2.0)
    jobs = generate_workload(wl, 30.0, workload_stream(21))
    cfg = config(machines=400, gamma=0.01, horizon=1000.0, seed=21)
    rep = run(cfg, None, NoSpec(), jobs=jobs)
    assert rep.censored == 0
    expected = math.fsum(
        0.01 * math.fsum(spec.durations) for spec in jobs)
    assert rep.total_resource == expected


def test_censored_job_excluded_but_resource_counted():
    cfg = config(machines=1, gamma=2.0, horizon=10.0)
    rep = run(cfg, None, Script({0: [Launch(0, 0)]}),
              jobs=[job(0, 0.0, [50.0])])
    assert len(rep.jobs) == 0
    assert rep.censored == 1
    assert rep.censored_resource == pytest.approx(2.0 * 10.0)
    assert rep.total_resource == pytest.approx(20.0)
    assert rep.mean_flowtime is None


def test_event_after_last_boundary_still_processed():
    cfg = config(machines=1, gamma=1.0, horizon=10.5)
    trace = []
    rep = run(cfg, None, Script({10: [Launch(0, 0)]}),
              jobs=[job(0, 9.5, [0.3])], trace=trace)
    (rec,) = rep.jobs
    assert rec.finish == pytest.approx(10.3)
    assert rep.censored == 0


def test_trace_record_schema_and_event_order():
    sink = io.StringIO()
    cfg = config(machines=2, gamma=1.0, horizon=60.0, seed=5)
    run(cfg, None, Mantri(), jobs=[job(0, 0.4, [30.0])], trace=sink)
    records = [json.loads(line) for line in sink.getvalue().splitlines()]
    assert records, "trace should not be empty"
    for rec in records:
        assert set(rec) == {"time", "event", "job", "task", "copy", "machine"}
        assert rec["event"] in {"arrive", "launch", "duplicate", "finish",
                                "kill"}
    events = [r["event"] for r in records]
    assert events[0] == "arrive"
    assert records[0]["time"] == pytest.approx(0.4)   # true arrival instant
    assert "duplicate" in events                       # Mantri fires on age
    order = {e: events.index(e) for e in ("arrive", "launch", "duplicate",
                                          "finish")}
    assert order["arrive"] < order["launch"] < order["duplicate"] \
        < order["finish"]
    t_finish = next(r["time"] for r in records if r["event"] == "finish")
    kills = [r for r in records if r["event"] == "kill"]
    assert len(kills) == 1 and kills[0]["time"] == t_finish
    # the race winner is whichever copy has the earlier effective finish
    dup = next(r for r in records if r["event"] == "duplicate")
    assert dup["copy"] == 1
    assert t_finish <= 31.0 + 1e-9   # first copy launched at 1.0 runs 30


def test_duplicate_duration_is_policy_stream_draw():
    # The duplicate launched by the script runs its own fresh duration from
    # its own start; with a first copy of 40 the duplicate (launched at 2)
    # wins iff its draw d satisfies 2 + d < 40.
    cfg = config(machines=2, gamma=1.0, horizon=120.0, seed=31)
    script = Script({0: [Launch(0, 0)], 2: [Launch(0, 0)]})
    rep = run(cfg, None, script, jobs=[job(0, 0.0, [40.0])])
    d = float(LAW.sample(policy_stream(31), 1)[0])
    (rec,) = rep.jobs
    expected_finish = min(40.0, 2.0 + d)
    assert rec.finish == pytest.approx(expected_finish)
    # loser is killed at the winner's finish: resource = winner run + loser run
    expected_resource = expected_finish + (expected_finish - 2.0)
    assert rec.resource == pytest.approx(expected_resource)


def test_seed_determinism_byte_identical_reports():
    wl = WorkloadSpec(rate=0.4, shape=2.0)
    for policy_name in ("nospec", "mantri", "detect", "ese"):
        cfg = config(machines=30, gamma=0.01, horizon=120.0, seed=17)
        a = run(cfg, wl, make_policy(policy_name, gamma=0.01, cap=8))
        b = run(cfg, wl, make_policy(policy_name, gamma=0.01, cap=8))
        assert a.to_json() == b.to_json(), policy_name


def test_workload_identical_across_policies():
    # Reports list finished jobs only, so compare each report against the
    # one realized workload: every record must match its JobSpec exactly.
    wl = WorkloadSpec(rate=0.4, shape=2.0)
    cfg = config(machines=60, gamma=0.01, horizon=150.0, seed=23)
    specs = {s.ident: s for s in
             generate_workload(wl, cfg.horizon, workload_stream(cfg.seed))}
    for policy in (NoSpec(), make_policy("detect", gamma=0.01, cap=8)):
        rep = run(cfg, wl, policy)
        assert rep.jobs, policy.name
        for rec in rep.jobs:
            spec = specs[rec.ident]
            assert rec.arrival == spec.arrival
            assert rec.tasks == spec.tasks


def test_run_requires_workload_or_jobs():
    with pytest.raises(ValueError, match="WorkloadSpec"):
        run(config(), None, NoSpec())


def test_fractional_slot_boundaries():
    # slot = 0.5: arrival 0.3 becomes visible at 0.5, not 1.0.
    trace = []
    cfg = ClusterConfig(machines=1, gamma=1.0, horizon=20.0, seed=1, slot=0.5)
    rep = run(cfg, None, NoSpec(), jobs=[job(0, 0.3, [1.0])], trace=trace)
    launch = next(r for r in trace if r["event"] == "launch")
    assert launch["time"] == pytest.approx(0.5)
    assert rep.jobs[0].finish == pytest.approx(1.5)
