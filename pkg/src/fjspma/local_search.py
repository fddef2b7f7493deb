"""Greedy machine/AGV reassignment and transport-node reordering.

The node move works on an AGV's task list read as a +1/-1 level walk (L0 =
empty ... LA = full).  With capacity A >= 3, loads sitting at levels A-1 or A
may move later (swap with the nearest following unload) and unloads at
levels 0 or 1 may move earlier (swap with the nearest preceding load); with
capacity 2 only loads at L2 and unloads at L0 qualify, and with capacity 1
strict alternation leaves nothing to move.  The final unload of a list is
never a candidate.  A move that would break the level bounds, put an unload
before its own load, or invert the unload order of one job's stages is
rejected; rejection is a normal outcome.
"""

from __future__ import annotations

import time

from .chromosome import (
    LOAD,
    UNLOAD,
    Chromosome,
    ChromosomeStructureError,
    TransportTask,
    attach_default_task_lists,
    decode,
    is_terminal,
)
from .instance import Instance

_MAX_SWEEPS_PER_AGV = 200


class Deadline:
    """Soft wall-clock limit threaded through the search loops."""

    def __init__(self, seconds: float | None):
        self.t_end = None if seconds is None else time.perf_counter() + seconds

    @classmethod
    def never(cls) -> "Deadline":
        return cls(None)

    def exceeded(self) -> bool:
        return self.t_end is not None and time.perf_counter() >= self.t_end


def layer_profile(task_list: list[TransportTask], capacity: int) -> list[int]:
    """Onboard count after each task; raises when the walk leaves [0, capacity]."""
    levels = []
    level = 0
    for task in task_list:
        level += 1 if task.kind == LOAD else -1
        if not 0 <= level <= capacity:
            raise ValueError(f"onboard count {level} outside [0,{capacity}]")
        levels.append(level)
    if levels and levels[-1] != 0:
        raise ValueError("task list must end with an empty AGV")
    return levels


def transformable_nodes(task_list: list[TransportTask], capacity: int) -> list[int]:
    """Positions whose node may move one level (see module docstring)."""
    if capacity <= 1 or not task_list:
        return []
    levels = layer_profile(task_list, capacity)
    if capacity == 2:
        load_levels = {2}
        unload_levels = {0}
    else:
        load_levels = {capacity - 1, capacity}
        unload_levels = {0, 1}
    last = len(task_list) - 1
    candidates = []
    for pos, (task, level) in enumerate(zip(task_list, levels)):
        if task.kind == LOAD and level in load_levels:
            candidates.append(pos)
        elif task.kind == UNLOAD and level in unload_levels and pos != last:
            candidates.append(pos)
    return candidates


def _stage_rank(inst: Instance, op_id: int) -> tuple[int, int]:
    if is_terminal(inst, op_id):
        job = op_id - inst.total_operations
        return job, inst.stages(job)
    op = inst.ops_flat[op_id]
    return op.job, op.stage


def _valid_after_move(task_list: list[TransportTask], capacity: int, inst: Instance | None) -> bool:
    level = 0
    unloaded: set[int] = set()
    loaded: set[int] = set()
    last_unload_stage: dict[int, int] = {}
    for task in task_list:
        if task.kind == LOAD:
            loaded.add(task.op)
            level += 1
        else:
            if task.op not in loaded:
                return False
            unloaded.add(task.op)
            level -= 1
            if inst is not None:
                job, stage = _stage_rank(inst, task.op)
                if job in last_unload_stage and stage < last_unload_stage[job]:
                    return False
                last_unload_stage[job] = stage
        if not 0 <= level <= capacity:
            return False
    return level == 0


def transform_node(
    task_list: list[TransportTask],
    position: int,
    capacity: int,
    inst: Instance | None = None,
) -> list[TransportTask] | None:
    """Apply one node move; returns the reordered list or None when rejected.

    A candidate load swaps with the nearest following unload, a candidate
    unload with the nearest preceding load.  When an instance is supplied,
    moves that reorder one job's unloads out of stage order are also
    rejected (they would make the schedule wait on itself).
    """
    task = task_list[position]
    if task.kind == LOAD:
        partner = next(
            (k for k in range(position + 1, len(task_list)) if task_list[k].kind == UNLOAD),
            None,
        )
    else:
        partner = next(
            (k for k in range(position - 1, -1, -1) if task_list[k].kind == LOAD),
            None,
        )
    if partner is None:
        return None
    new_list = list(task_list)
    new_list[position], new_list[partner] = new_list[partner], new_list[position]
    if not _valid_after_move(new_list, capacity, inst):
        return None
    return new_list


def greedy_machine_agv_search(
    chrom: Chromosome, inst: Instance, deadline: Deadline | None = None
) -> Chromosome:
    """First-improvement sweep over machine genes, then over AGV genes.

    Every trial rebuilds the task lists with the container rule and decodes;
    the result is never worse than the input.
    """
    deadline = deadline or Deadline.never()
    best = chrom
    best_fit = decode(best, inst).makespan
    for o, op in enumerate(inst.ops_flat):
        if deadline.exceeded():
            return best
        current = best.machine_asgn[o]
        for m in sorted(op.eligible):
            if m == current:
                continue
            trial = best.clone()
            trial.machine_asgn[o] = m
            attach_default_task_lists(trial, inst)
            fit = decode(trial, inst).makespan
            if fit < best_fit:
                best, best_fit = trial, fit
                break
            if deadline.exceeded():
                return best
    for o in range(inst.total_operations):
        if deadline.exceeded():
            return best
        current = best.agv_asgn[o]
        for r in range(inst.num_agvs):
            if r == current:
                continue
            trial = best.clone()
            trial.agv_asgn[o] = r
            attach_default_task_lists(trial, inst)
            fit = decode(trial, inst).makespan
            if fit < best_fit:
                best, best_fit = trial, fit
                break
            if deadline.exceeded():
                return best
    return best


def _transport_node_search(
    chrom: Chromosome, inst: Instance, fitness: float, deadline: Deadline
) -> tuple[Chromosome, float]:
    """Greedy sweep of node moves over every AGV's task list."""
    best = chrom
    best_fit = fitness
    cap = inst.agv_capacity
    for r in range(inst.num_agvs):
        for _ in range(_MAX_SWEEPS_PER_AGV):
            if deadline.exceeded():
                return best, best_fit
            improved = False
            for pos in transformable_nodes(best.task_lists[r], cap):
                candidate_list = transform_node(best.task_lists[r], pos, cap, inst)
                if candidate_list is None:
                    continue
                trial = best.clone()
                trial.task_lists[r] = candidate_list
                try:
                    fit = decode(trial, inst).makespan
                except ChromosomeStructureError:
                    continue  # cross-AGV circular wait; treat as rejected
                if fit < best_fit:
                    best, best_fit = trial, fit
                    improved = True
                    break
                if deadline.exceeded():
                    return best, best_fit
            if not improved:
                break
    return best, best_fit


def conditional_local_search(
    chrom: Chromosome,
    region_mean: float,
    inst: Instance,
    deadline: Deadline | None = None,
) -> Chromosome:
    """Run the full local search only on better-than-average solutions.

    Solutions at or above their region's mean fitness come back unchanged.
    Otherwise: greedy machine/AGV reassignment first, then the transport
    node moves, keeping strict improvements only.
    """
    deadline = deadline or Deadline.never()
    fitness = decode(chrom, inst).makespan
    if not fitness < region_mean:
        return chrom
    improved = greedy_machine_agv_search(chrom, inst, deadline)
    fitness = decode(improved, inst).makespan
    improved, _ = _transport_node_search(improved, inst, fitness, deadline)
    return improved
