"""Three-layer solution encoding and the timed-schedule decoder.

A chromosome carries:

* ``op_seq`` -- job-repetition sequence: each job id appears once per stage,
  and the j-th occurrence of a job denotes its stage-j operation, so every
  permutation of the multiset is precedence-feasible;
* ``machine_asgn`` / ``agv_asgn`` -- per real operation (global op id), the
  chosen eligible machine and the AGV that serves both transport tasks of
  the operation;
* ``task_lists`` -- per AGV, the ordered loading (+) / unloading (-) tasks.

Every job additionally gets a virtual terminal delivery to the product
warehouse (processing time 0, no machine).  Terminal "operations" are given
ids ``total_operations + job`` and ride the AGV of the job's last real
operation; they are synthesized here, never stored in the instance.

An operation whose predecessor ran on the same machine needs no transport
and contributes no tasks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instance import MW_LOCATION, Instance

LOAD = 1
UNLOAD = -1


class ChromosomeStructureError(ValueError):
    """A task list (or op sequence) is structurally unusable for decoding."""


class TransportTask(NamedTuple):
    op: int
    kind: int  # LOAD or UNLOAD

    def __repr__(self):
        sign = "+" if self.kind == LOAD else "-"
        return f"{sign}T{self.op}"


class TraceEntry(NamedTuple):
    task: TransportTask
    from_loc: int
    to_loc: int
    start: float
    end: float


@dataclass
class Chromosome:
    op_seq: list[int]
    machine_asgn: list[int]
    agv_asgn: list[int]
    task_lists: list[list[TransportTask]] = field(default_factory=list)

    def clone(self) -> "Chromosome":
        return Chromosome(
            op_seq=list(self.op_seq),
            machine_asgn=list(self.machine_asgn),
            agv_asgn=list(self.agv_asgn),
            task_lists=[list(tl) for tl in self.task_lists],
        )


@dataclass
class Schedule:
    """Timed result of decoding: operation windows, transport tasks, AGV traces."""

    op_start: dict[int, float]
    op_end: dict[int, float]
    task_start: dict[TransportTask, float]
    task_end: dict[TransportTask, float]
    agv_traces: list[list[TraceEntry]]
    makespan: float


def op_seq_to_op_ids(op_seq: list[int], inst: Instance) -> list[int]:
    """Expand a job-repetition sequence into global operation ids."""
    counts = [0] * inst.num_jobs
    ids = []
    for job in op_seq:
        if not 0 <= job < inst.num_jobs:
            raise ChromosomeStructureError(f"job id {job} out of range")
        stage = counts[job]
        if stage >= inst.stages(job):
            raise ChromosomeStructureError(f"job {job} appears more than {inst.stages(job)} times")
        ids.append(inst.op_id(job, stage))
        counts[job] += 1
    if len(op_seq) != inst.total_operations:
        raise ChromosomeStructureError(
            f"op sequence length {len(op_seq)} != {inst.total_operations}"
        )
    return ids


def terminal_op_id(inst: Instance, job: int) -> int:
    return inst.total_operations + job


def is_terminal(inst: Instance, op_id: int) -> bool:
    return op_id >= inst.total_operations


def job_of_op(inst: Instance, op_id: int) -> int:
    if is_terminal(inst, op_id):
        return op_id - inst.total_operations
    return inst.ops_flat[op_id].job


def _extended_op_info(chrom: Chromosome, inst: Instance):
    """Static per-op transport data for real + terminal operations.

    Returns (needs_transport, pickup_loc, dropoff_loc, agv_of) indexed by
    extended op id.  Pickup/dropoff are location indices; they do not depend
    on timing because each job's route is fixed by the machine layer.
    """
    n = inst.total_operations
    total = n + inst.num_jobs
    needs = [False] * total
    pickup = [0] * total
    dropoff = [0] * total
    agv_of = [0] * total
    for job in range(inst.num_jobs):
        prev_machine = None  # None means the job is still at MW
        for stage in range(inst.stages(job)):
            o = inst.op_id(job, stage)
            m = chrom.machine_asgn[o]
            if m not in inst.ops_flat[o].eligible:
                raise ChromosomeStructureError(
                    f"op {o} assigned ineligible machine {m}"
                )
            agv_of[o] = chrom.agv_asgn[o]
            pickup[o] = MW_LOCATION if prev_machine is None else inst.machine_location(prev_machine)
            dropoff[o] = inst.machine_location(m)
            needs[o] = prev_machine != m
            prev_machine = m
        t = terminal_op_id(inst, job)
        last = inst.op_id(job, inst.stages(job) - 1)
        agv_of[t] = chrom.agv_asgn[last]
        pickup[t] = inst.machine_location(chrom.machine_asgn[last])
        dropoff[t] = inst.pw_location
        needs[t] = True  # PW is never a machine
    return needs, pickup, dropoff, agv_of


def transport_queues(
    op_seq: list[int],
    machine_asgn: list[int],
    agv_asgn: list[int],
    inst: Instance,
) -> list[list[int]]:
    """Per AGV, the transported operations in service order.

    Real operations appear in op-sequence order (those whose predecessor ran
    on the same machine are omitted); the terminal warehouse deliveries are
    appended after them, ordered by where each job's last real operation
    sits in the sequence.
    """
    chrom = Chromosome(op_seq=op_seq, machine_asgn=machine_asgn, agv_asgn=agv_asgn)
    needs, _, _, agv_of = _extended_op_info(chrom, inst)
    op_ids = op_seq_to_op_ids(op_seq, inst)
    pending: list[list[int]] = [[] for _ in range(inst.num_agvs)]
    terminals: list[int] = []
    for o in op_ids:
        if needs[o]:
            pending[agv_of[o]].append(o)
        op = inst.ops_flat[o]
        if op.stage == inst.stages(op.job) - 1:
            terminals.append(terminal_op_id(inst, op.job))
    for t in terminals:
        pending[agv_of[t]].append(t)
    return pending


def build_default_task_lists(
    op_seq: list[int],
    machine_asgn: list[int],
    agv_asgn: list[int],
    inst: Instance,
) -> list[list[TransportTask]]:
    """Default per-AGV task order via the container rule.

    Loads are taken greedily in queue order while the simulated container
    has room; once full, all carried jobs are unloaded FIFO, and leftovers
    are flushed at the end.
    """
    cap = inst.agv_capacity
    lists: list[list[TransportTask]] = []
    for ops in transport_queues(op_seq, machine_asgn, agv_asgn, inst):
        tasks: list[TransportTask] = []
        carried: list[int] = []
        for o in ops:
            if len(carried) == cap:
                for done in carried:
                    tasks.append(TransportTask(done, UNLOAD))
                carried.clear()
            tasks.append(TransportTask(o, LOAD))
            carried.append(o)
        for done in carried:
            tasks.append(TransportTask(done, UNLOAD))
        lists.append(tasks)
    return lists


def attach_default_task_lists(chrom: Chromosome, inst: Instance) -> Chromosome:
    chrom.task_lists = build_default_task_lists(
        chrom.op_seq, chrom.machine_asgn, chrom.agv_asgn, inst
    )
    return chrom


def _check_task_lists(chrom: Chromosome, inst: Instance, needs, agv_of) -> None:
    """Structural validation: pairing, ownership, prefix bounds, pair order."""
    total = inst.total_operations + inst.num_jobs
    seen_load = [0] * total
    seen_unload = [0] * total
    if len(chrom.task_lists) != inst.num_agvs:
        raise ChromosomeStructureError(
            f"{len(chrom.task_lists)} task lists for {inst.num_agvs} AGVs"
        )
    for r, tasks in enumerate(chrom.task_lists):
        level = 0
        loaded_here: set[int] = set()
        for t in tasks:
            if not 0 <= t.op < total:
                raise ChromosomeStructureError(f"task references unknown op {t.op}")
            if not needs[t.op]:
                raise ChromosomeStructureError(f"op {t.op} needs no transport but is listed")
            if agv_of[t.op] != r:
                raise ChromosomeStructureError(f"op {t.op} listed on AGV {r}, assigned {agv_of[t.op]}")
            if t.kind == LOAD:
                seen_load[t.op] += 1
                loaded_here.add(t.op)
                level += 1
            else:
                seen_unload[t.op] += 1
                if t.op not in loaded_here:
                    raise ChromosomeStructureError(f"unload of op {t.op} precedes its load")
                level -= 1
            if not 0 <= level <= inst.agv_capacity:
                raise ChromosomeStructureError(
                    f"AGV {r} onboard count {level} outside [0,{inst.agv_capacity}]"
                )
        if level != 0:
            raise ChromosomeStructureError(f"AGV {r} task list does not end empty")
    for o in range(total):
        expect = 1 if needs[o] else 0
        if seen_load[o] != expect or seen_unload[o] != expect:
            raise ChromosomeStructureError(
                f"op {o} has {seen_load[o]} loads / {seen_unload[o]} unloads, expected {expect}"
            )


def decode(chrom: Chromosome, inst: Instance) -> Schedule:
    """Decode a chromosome into a timed schedule (pure, deterministic).

    AGV tasks run in task-list order: a load starts when the AGV finishes
    its previous task and ends after travelling to the job's pickup point;
    an unload starts at the later of the AGV being ready and the job's
    previous operation completing, and ends after the delivery leg.
    Processing starts at the later of the delivery and the machine becoming
    free, with machine order following the operation sequence.  The makespan
    is the last completion over all operations and warehouse deliveries.
    """
    n = inst.total_operations
    op_ids = op_seq_to_op_ids(chrom.op_seq, inst)
    if len(chrom.machine_asgn) != n or len(chrom.agv_asgn) != n:
        raise ChromosomeStructureError("assignment layers must have one gene per operation")
    for r in chrom.agv_asgn:
        if not 0 <= r < inst.num_agvs:
            raise ChromosomeStructureError(f"AGV index {r} out of range")
    needs, pickup, dropoff, agv_of = _extended_op_info(chrom, inst)
    _check_task_lists(chrom, inst, needs, agv_of)

    tt = inst.transport_time
    agv_time = [0.0] * inst.num_agvs
    agv_loc = [MW_LOCATION] * inst.num_agvs
    ptr = [0] * inst.num_agvs

    # per-machine processing order follows op_seq
    machine_queue: list[list[int]] = [[] for _ in range(inst.num_machines)]
    for o in op_ids:
        machine_queue[chrom.machine_asgn[o]].append(o)
    mq_head = [0] * inst.num_machines
    machine_free = [0.0] * inst.num_machines

    completion: dict[int, float] = {}
    unload_end: dict[int, float] = {}
    op_start: dict[int, float] = {}
    op_end: dict[int, float] = {}
    task_start: dict[TransportTask, float] = {}
    task_end: dict[TransportTask, float] = {}
    traces: list[list[TraceEntry]] = [[] for _ in range(inst.num_agvs)]

    def predecessor_completion(o: int) -> float | None:
        """Completion of the job's previous stage; 0 for first stages, None if unknown yet."""
        if is_terminal(inst, o):
            job = o - n
            return completion.get(inst.op_id(job, inst.stages(job) - 1))
        op = inst.ops_flat[o]
        if op.stage == 0:
            return 0.0
        return completion.get(inst.op_id(op.job, op.stage - 1))

    progress = True
    while progress:
        progress = False
        for r in range(inst.num_agvs):
            tasks = chrom.task_lists[r]
            while ptr[r] < len(tasks):
                task = tasks[ptr[r]]
                if task.kind == LOAD:
                    start = agv_time[r]
                    end = start + tt[agv_loc[r]][pickup[task.op]]
                    traces[r].append(TraceEntry(task, agv_loc[r], pickup[task.op], start, end))
                    agv_loc[r] = pickup[task.op]
                else:
                    prev_done = predecessor_completion(task.op)
                    if prev_done is None:
                        break  # job not ready; other traffic must be timed first
                    start = max(agv_time[r], prev_done)
                    end = start + tt[agv_loc[r]][dropoff[task.op]]
                    traces[r].append(TraceEntry(task, agv_loc[r], dropoff[task.op], start, end))
                    agv_loc[r] = dropoff[task.op]
                    unload_end[task.op] = end
                    if is_terminal(inst, task.op):
                        completion[task.op] = end
                        op_start[task.op] = end
                        op_end[task.op] = end
                task_start[task] = start
                task_end[task] = end
                agv_time[r] = end
                ptr[r] += 1
                progress = True
        for m in range(inst.num_machines):
            queue = machine_queue[m]
            while mq_head[m] < len(queue):
                o = queue[mq_head[m]]
                if needs[o]:
                    ready = unload_end.get(o)
                else:
                    ready = predecessor_completion(o)
                if ready is None:
                    break
                start = max(ready, machine_free[m])
                pt = inst.ops_flat[o].eligible[chrom.machine_asgn[o]]
                op_start[o] = start
                op_end[o] = start + pt
                completion[o] = start + pt
                machine_free[m] = start + pt
                mq_head[m] += 1
                progress = True

    if any(ptr[r] < len(chrom.task_lists[r]) for r in range(inst.num_agvs)) or any(
        mq_head[m] < len(machine_queue[m]) for m in range(inst.num_machines)
    ):
        raise ChromosomeStructureError("task lists wait on each other; schedule cannot progress")

    makespan = 0.0
    for v in op_end.values():
        makespan = max(makespan, v)
    for v in task_end.values():
        makespan = max(makespan, v)
    return Schedule(
        op_start=op_start,
        op_end=op_end,
        task_start=task_start,
        task_end=task_end,
        agv_traces=traces,
        makespan=makespan,
    )


def solution_vector(chrom: Chromosome) -> np.ndarray:
    """Integer embedding: op-sequence job ids, machine genes, AGV genes."""
    return np.asarray(chrom.op_seq + chrom.machine_asgn + chrom.agv_asgn, dtype=np.int64)


def chromosome_from_vector(vector: np.ndarray, inst: Instance) -> Chromosome:
    """Rebuild a chromosome from its solution vector (default task lists)."""
    n = inst.total_operations
    if len(vector) != 3 * n:
        raise ChromosomeStructureError(f"vector length {len(vector)} != {3 * n}")
    chrom = Chromosome(
        op_seq=[int(v) for v in vector[:n]],
        machine_asgn=[int(v) for v in vector[n : 2 * n]],
        agv_asgn=[int(v) for v in vector[2 * n :]],
    )
    return attach_default_task_lists(chrom, inst)


def repair_machine_layer(chrom: Chromosome, inst: Instance, rng: random.Random) -> Chromosome:
    """Replace ineligible machine genes by a uniformly random eligible machine.

    Valid genes are untouched.  Task lists are rebuilt when anything changed,
    because machine moves alter which operations need transport.
    """
    changed = False
    for o, op in enumerate(inst.ops_flat):
        if chrom.machine_asgn[o] not in op.eligible:
            chrom.machine_asgn[o] = rng.choice(sorted(op.eligible))
            changed = True
    if changed:
        attach_default_task_lists(chrom, inst)
    return chrom


def random_chromosome(inst: Instance, rng: random.Random) -> Chromosome:
    """Uniform random valid chromosome with default task lists."""
    seq = [job for job in range(inst.num_jobs) for _ in range(inst.stages(job))]
    rng.shuffle(seq)
    machines = [rng.choice(sorted(op.eligible)) for op in inst.ops_flat]
    agvs = [rng.randrange(inst.num_agvs) for _ in range(inst.total_operations)]
    return attach_default_task_lists(Chromosome(seq, machines, agvs), inst)
