"""Feasibility checks for decoded schedules.

The checker re-derives every constraint from the schedule's recorded times
and the chromosome/instance data; it shares no timing code with the decoder,
so agreement between the two is meaningful evidence.

Violation kinds:

* ``makespan``        -- reported makespan below some completion;
* ``pairing``         -- a transported operation without exactly one load and
                         one unload on a single AGV (or tasks for operations
                         that need no transport);
* ``capacity-window`` -- an AGV's onboard count leaves [0, capacity] or its
                         trace does not end empty;
* ``agv-overlap``     -- two tasks of one AGV overlap in time;
* ``link``            -- an unload starting before the AGV is ready or before
                         the job's previous operation completes; processing
                         starting before its delivery; or a no-transport
                         operation starting before its predecessor finishes;
* ``assignment``      -- an operation on an ineligible machine;
* ``machine-overlap`` -- two operations overlap on one machine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chromosome import LOAD, UNLOAD, Chromosome, Schedule, is_terminal, terminal_op_id
from .instance import Instance

_EPS = 1e-9


@dataclass
class Violation:
    kind: str
    ops: tuple
    times: tuple
    message: str

    def to_text(self) -> str:
        ops = ",".join(str(o) for o in self.ops)
        times = ",".join(f"{t:g}" for t in self.times)
        return f"{self.kind} ops={ops} times={times} :: {self.message}"


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    def add(self, kind, ops, times, message):
        self.violations.append(Violation(kind, tuple(ops), tuple(times), message))

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy when violations exist
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def to_text(self) -> str:
        if not self.violations:
            return "feasible\n"
        return "\n".join(v.to_text() for v in self.violations) + "\n"


def _transport_needs(chrom: Chromosome, inst: Instance) -> dict[int, bool]:
    needs = {}
    for job in range(inst.num_jobs):
        prev = None
        for stage in range(inst.stages(job)):
            o = inst.op_id(job, stage)
            m = chrom.machine_asgn[o]
            needs[o] = prev != m
            prev = m
        needs[terminal_op_id(inst, job)] = True
    return needs


def check_schedule(schedule: Schedule, chrom: Chromosome, inst: Instance) -> ViolationReport:
    """Check a schedule against the problem's constraint families."""
    report = ViolationReport()
    needs = _transport_needs(chrom, inst)

    # (1) makespan dominates every completion and delivery
    for o, end in schedule.op_end.items():
        if end > schedule.makespan + _EPS:
            report.add("makespan", (o,), (end, schedule.makespan), "operation completes after makespan")
    for task, end in schedule.task_end.items():
        if end > schedule.makespan + _EPS:
            report.add("makespan", (task.op,), (end, schedule.makespan), "transport ends after makespan")

    # (2) pairing: one load + one unload per transported op, on one AGV
    placement: dict[int, list[tuple[int, int]]] = {}
    for r, trace in enumerate(schedule.agv_traces):
        for entry in trace:
            placement.setdefault(entry.task.op, []).append((r, entry.task.kind))
    for o, needed in needs.items():
        entries = placement.get(o, [])
        if not needed:
            if entries:
                report.add("pairing", (o,), (), "operation needs no transport but has tasks")
            continue
        agvs = {r for r, _ in entries}
        kinds = sorted(k for _, k in entries)
        if len(entries) != 2 or kinds != [UNLOAD, LOAD] or len(agvs) != 1:
            report.add("pairing", (o,), (), f"expected one load+unload on one AGV, got {entries}")

    # (3) capacity window and (4)-(7) single-task-at-a-time, per AGV trace
    for r, trace in enumerate(schedule.agv_traces):
        level = 0
        for entry in trace:
            level += 1 if entry.task.kind == LOAD else -1
            if not 0 <= level <= inst.agv_capacity:
                report.add(
                    "capacity-window", (entry.task.op,), (entry.start,),
                    f"AGV {r} onboard count {level} outside [0,{inst.agv_capacity}]",
                )
        if level != 0:
            report.add("capacity-window", (), (), f"AGV {r} trace ends carrying {level} job(s)")
        for a, b in zip(trace, trace[1:]):
            if b.start < a.end - _EPS:
                report.add(
                    "agv-overlap", (a.task.op, b.task.op), (a.end, b.start),
                    f"AGV {r} tasks overlap",
                )

    # (8)-(10) link transport to processing
    def pred_completion(o: int) -> float:
        if is_terminal(inst, o):
            job = o - inst.total_operations
            return schedule.op_end.get(inst.op_id(job, inst.stages(job) - 1), 0.0)
        op = inst.ops_flat[o]
        if op.stage == 0:
            return 0.0
        return schedule.op_end.get(inst.op_id(op.job, op.stage - 1), 0.0)

    for r, trace in enumerate(schedule.agv_traces):
        prev_end = 0.0
        for entry in trace:
            if entry.task.kind == UNLOAD:
                floor = max(prev_end, pred_completion(entry.task.op))
                if entry.start < floor - _EPS:
                    report.add(
                        "link", (entry.task.op,), (entry.start, floor),
                        "unload starts before AGV ready / previous operation done",
                    )
            prev_end = entry.end
    unload_end = {
        entry.task.op: entry.end
        for trace in schedule.agv_traces
        for entry in trace
        if entry.task.kind == UNLOAD
    }
    for o in range(inst.total_operations):
        start = schedule.op_start.get(o)
        if start is None:
            report.add("link", (o,), (), "operation missing from schedule")
            continue
        if needs[o]:
            delivered = unload_end.get(o)
            if delivered is not None and start < delivered - _EPS:
                report.add("link", (o,), (start, delivered), "processing starts before delivery")
        else:
            floor = pred_completion(o)
            if start < floor - _EPS:
                report.add("link", (o,), (start, floor), "processing starts before predecessor completes")

    # (11) eligibility and declared processing time
    for o, op in enumerate(inst.ops_flat):
        m = chrom.machine_asgn[o]
        if m not in op.eligible:
            report.add("assignment", (o,), (), f"machine {m} not eligible for op {o}")

    # (12)-(13) machine intervals must not overlap
    per_machine: dict[int, list[tuple[float, float, int]]] = {}
    for o in range(inst.total_operations):
        if o in schedule.op_start:
            m = chrom.machine_asgn[o]
            per_machine.setdefault(m, []).append((schedule.op_start[o], schedule.op_end[o], o))
    for m, intervals in per_machine.items():
        intervals.sort()
        for (s1, e1, o1), (s2, e2, o2) in zip(intervals, intervals[1:]):
            if s2 < e1 - _EPS:
                report.add("machine-overlap", (o1, o2), (e1, s2), f"operations overlap on machine {m}")

    return report
