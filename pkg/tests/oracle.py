"""Exhaustive enumeration oracle for tiny instances.

Walks every encoding: each distinct job-repetition sequence, each machine
assignment from the eligibility sets, each AGV assignment, and -- on top of
the container-rule default -- every valid interleaving of each AGV's task
queue (loads in queue order, unloads FIFO, onboard count within capacity).
That interleaving family is a superset of everything the node-move local
search can reach from a default list, so its minimum bounds the solver from
below while the default-list minimum bounds what pure gene search can reach.
"""

from __future__ import annotations

import itertools

from fjspma.chromosome import (
    LOAD,
    UNLOAD,
    Chromosome,
    TransportTask,
    build_default_task_lists,
    decode,
    transport_queues,
)
from fjspma.instance import Instance


def all_op_sequences(inst: Instance):
    base = [job for job in range(inst.num_jobs) for _ in range(inst.stages(job))]
    return sorted(set(itertools.permutations(base)))


def all_machine_assignments(inst: Instance):
    choices = [sorted(op.eligible) for op in inst.ops_flat]
    return itertools.product(*choices)


def all_agv_assignments(inst: Instance):
    return itertools.product(range(inst.num_agvs), repeat=inst.total_operations)


def queue_interleavings(queue: list[int], capacity: int) -> list[list[TransportTask]]:
    """All load/unload orders keeping queue order for loads and FIFO unloads."""
    n = len(queue)
    results: list[list[TransportTask]] = []

    def grow(loads: int, unloads: int, tasks: list[TransportTask]):
        if loads == n and unloads == n:
            results.append(list(tasks))
            return
        if loads < n and loads - unloads < capacity:
            tasks.append(TransportTask(queue[loads], LOAD))
            grow(loads + 1, unloads, tasks)
            tasks.pop()
        if unloads < loads:
            tasks.append(TransportTask(queue[unloads], UNLOAD))
            grow(loads, unloads + 1, tasks)
            tasks.pop()

    grow(0, 0, [])
    return results


def enumerate_optimum(inst: Instance) -> tuple[float, float]:
    """(optimum over all interleavings, optimum over default lists only)."""
    best_all = float("inf")
    best_default = float("inf")
    for op_seq in all_op_sequences(inst):
        seq = list(op_seq)
        for machines in all_machine_assignments(inst):
            machines = list(machines)
            for agvs in all_agv_assignments(inst):
                agvs = list(agvs)
                default_lists = build_default_task_lists(seq, machines, agvs, inst)
                chrom = Chromosome(seq, machines, agvs, default_lists)
                makespan = decode(chrom, inst).makespan
                best_default = min(best_default, makespan)
                best_all = min(best_all, makespan)
                queues = transport_queues(seq, machines, agvs, inst)
                options = [queue_interleavings(q, inst.agv_capacity) for q in queues]
                for combo in itertools.product(*options):
                    lists = [list(tl) for tl in combo]
                    if lists == default_lists:
                        continue
                    variant = Chromosome(seq, machines, agvs, lists)
                    best_all = min(best_all, decode(variant, inst).makespan)
    return best_all, best_default
