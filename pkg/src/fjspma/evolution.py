"""The history-guided region-partitioning evolutionary solver.

One run keeps a single global k-d tree alive for its whole duration: every
evaluated solution is recorded into its region, regions are split around
seed solutions each generation, and the current clusters drive both the
exploitation step (per-cluster subpopulations under crossover, mutation and
conditional local search) and the exploration step (recombining members of
two roulette-picked clusters).  A plain-GA baseline with tournament
selection shares the operators but none of the region machinery.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import NamedTuple

from .chromosome import (
    Chromosome,
    Schedule,
    attach_default_task_lists,
    chromosome_from_vector,
    decode,
    random_chromosome,
    repair_machine_layer,
    solution_vector,
)
from .instance import MW_LOCATION, Instance
from .local_search import Deadline, conditional_local_search
from .niching import Cluster, group_clusters, identify_seeds
from .regions import GlobalTree, SolutionRecord, divide_regions
from .validation import check_schedule

_SAMPLE_RETRIES = 30
_SEED_SAMPLE_CAP = 2000  # bound the per-cluster NBD matrix on long runs


@dataclass
class HrpeoParams:
    n1: int = 6
    n2: int = 9
    alpha: float = 3.5
    mutation_rate: float = 0.1
    rng_seed: int = 0
    time_budget_ms: float | None = None
    generations: int | None = None
    dedup_distance: float = 2.0

    def __post_init__(self):
        if self.n1 < 1:
            raise ValueError("n1 must be >= 1")
        if self.n2 < 0:
            raise ValueError("n2 must be >= 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must be in [0, 1]")


class HistoryPoint(NamedTuple):
    generation: int
    elapsed_ms: float
    best_makespan: float


@dataclass
class RunState:
    tree: GlobalTree | None
    clusters: list[Cluster]
    subpops: list[list[Chromosome]]
    best_chromosome: Chromosome | None
    best_fitness: float
    history: list[HistoryPoint]


class RunResult(NamedTuple):
    chromosome: Chromosome
    schedule: Schedule
    history: list[HistoryPoint]
    state: RunState


# ---------------------------------------------------------------------------
# first-come-first-served timing used by the initializer


class _FcfsSim:
    """Greedy single-trip timing; picks earliest-free machines and AGVs."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.machine_free = [0.0] * inst.num_machines
        self.agv_free = [0.0] * inst.num_agvs
        self.agv_loc = [MW_LOCATION] * inst.num_agvs
        self.job_completion = [0.0] * inst.num_jobs
        self.job_machine: list[int | None] = [None] * inst.num_jobs
        self.machines: list[tuple[int, int]] = []  # (op_id, machine)
        self.agvs: list[tuple[int, int]] = []
        self.horizon = 0.0

    def step(self, op_id: int) -> None:
        inst = self.inst
        op = inst.ops_flat[op_id]
        machine = min(op.eligible, key=lambda m: (self.machine_free[m], m))
        agv = min(range(inst.num_agvs), key=lambda r: (self.agv_free[r], r))
        prev_machine = self.job_machine[op.job]
        m_loc = inst.machine_location(machine)
        if prev_machine == machine:
            ready = self.job_completion[op.job]
        else:
            job_loc = MW_LOCATION if prev_machine is None else inst.machine_location(prev_machine)
            tt = inst.transport_time
            load_end = self.agv_free[agv] + tt[self.agv_loc[agv]][job_loc]
            unload_end = max(load_end, self.job_completion[op.job]) + tt[job_loc][m_loc]
            self.agv_free[agv] = unload_end
            self.agv_loc[agv] = m_loc
            ready = unload_end
        start = max(ready, self.machine_free[machine])
        end = start + op.eligible[machine]
        self.machine_free[machine] = end
        self.job_completion[op.job] = end
        self.job_machine[op.job] = machine
        self.machines.append((op_id, machine))
        self.agvs.append((op_id, agv))
        self.horizon = max(self.horizon, end)


def _fcfs_score(prefix_ids: list[int], inst: Instance) -> float:
    sim = _FcfsSim(inst)
    for op_id in prefix_ids:
        sim.step(op_id)
    return sim.horizon


def _fcfs_chromosome(op_seq: list[int], inst: Instance) -> Chromosome:
    sim = _FcfsSim(inst)
    counts = [0] * inst.num_jobs
    for job in op_seq:
        sim.step(inst.op_id(job, counts[job]))
        counts[job] += 1
    machines = [0] * inst.total_operations
    agvs = [0] * inst.total_operations
    for op_id, m in sim.machines:
        machines[op_id] = m
    for op_id, r in sim.agvs:
        agvs[op_id] = r
    return attach_default_task_lists(Chromosome(list(op_seq), machines, agvs), inst)


def initialize_population(inst: Instance, n1: int, rng: random.Random) -> list[Chromosome]:
    """Decision-tree initialization, one subtree per possible first operation.

    Each subtree grows layer by layer, appending every feasible next
    operation; whenever a layer holds more than n1 branches, the partial
    sequences are timed with the first-come-first-served rule and only the
    n1 most promising survive.  Machine and AGV genes of the finished
    sequences also follow that rule.  Subtrees short of n1 full sequences
    are padded with assignment-randomized copies so the population size is
    exactly num_jobs * n1.
    """
    population: list[Chromosome] = []
    for first_job in range(inst.num_jobs):
        frontier = [[first_job]]
        for _ in range(1, inst.total_operations):
            expanded = []
            for seq in frontier:
                counts = [0] * inst.num_jobs
                for j in seq:
                    counts[j] += 1
                for job in range(inst.num_jobs):
                    if counts[job] < inst.stages(job):
                        expanded.append(seq + [job])
            if len(expanded) > n1:
                def prefix_ids(seq):
                    counts = [0] * inst.num_jobs
                    ids = []
                    for j in seq:
                        ids.append(inst.op_id(j, counts[j]))
                        counts[j] += 1
                    return ids

                scored = sorted(
                    range(len(expanded)),
                    key=lambda k: (_fcfs_score(prefix_ids(expanded[k]), inst), k),
                )
                expanded = [expanded[k] for k in scored[:n1]]
            frontier = expanded
        branch = [_fcfs_chromosome(seq, inst) for seq in frontier]
        while len(branch) < n1:
            template = branch[rng.randrange(len(branch))]
            variant = template.clone()
            variant.machine_asgn = [rng.choice(sorted(op.eligible)) for op in inst.ops_flat]
            variant.agv_asgn = [rng.randrange(inst.num_agvs) for _ in range(inst.total_operations)]
            attach_default_task_lists(variant, inst)
            branch.append(variant)
        population.extend(branch)
    return population


# ---------------------------------------------------------------------------
# variation operators


def pox_crossover(
    p1_opseq: list[int], p2_opseq: list[int], rng: random.Random
) -> tuple[list[int], list[int]]:
    """Precedence-preserving crossover on job-repetition sequences.

    A random nonempty proper subset of the job ids stays fixed in parent 1
    (resp. its complement in parent 2); the other parent's remaining genes
    fill the gaps in their own order.  Per-job occurrence counts survive.
    """
    jobs = sorted(set(p1_opseq))
    if len(jobs) < 2:
        return list(p1_opseq), list(p2_opseq)
    while True:
        keep_a = {j for j in jobs if rng.random() < 0.5}
        if 0 < len(keep_a) < len(jobs):
            break

    def build(keeper, keep_set, donor):
        child = [g if g in keep_set else None for g in keeper]
        fill = iter(g for g in donor if g not in keep_set)
        return [g if g is not None else next(fill) for g in child]

    c1 = build(p1_opseq, keep_a, p2_opseq)
    keep_b = set(jobs) - keep_a
    c2 = build(p2_opseq, keep_b, p1_opseq)
    return c1, c2


def _pmx_child(base: list[int], donor: list[int], i: int, j: int) -> list[int]:
    child = list(base)
    child[i:j] = donor[i:j]
    mapping = {donor[k]: base[k] for k in range(i, j)}
    for pos in list(range(0, i)) + list(range(j, len(base))):
        v = base[pos]
        seen = set()
        while v in mapping and v not in seen:
            seen.add(v)
            v = mapping[v]
        child[pos] = v
    return child


def pmx_crossover(
    p1_layer: list[int], p2_layer: list[int], rng: random.Random
) -> tuple[list[int], list[int]]:
    """Partially-mapped crossover on an assignment layer.

    Exchanges a random segment and resolves the outside positions through
    the segment mapping.  On machine layers the children may name
    ineligible machines; run repair_machine_layer afterwards.
    """
    n = len(p1_layer)
    if n == 0:
        return [], []
    i, j = sorted((rng.randrange(n + 1), rng.randrange(n + 1)))
    if i == j:
        return list(p1_layer), list(p2_layer)
    return _pmx_child(p1_layer, p2_layer, i, j), _pmx_child(p2_layer, p1_layer, i, j)


def mutate(chrom: Chromosome, rate: float, rng: random.Random, inst: Instance) -> Chromosome:
    """Swap mutation on the sequence, resampling on the assignment layers.

    With probability `rate` two sequence positions swap; each machine gene
    resamples among its eligible machines with probability `rate`, each AGV
    gene over the fleet.  Task lists are rebuilt whenever a gene changed.
    """
    changed = False
    if len(chrom.op_seq) >= 2 and rng.random() < rate:
        a, b = rng.sample(range(len(chrom.op_seq)), 2)
        if chrom.op_seq[a] != chrom.op_seq[b]:
            changed = True
        chrom.op_seq[a], chrom.op_seq[b] = chrom.op_seq[b], chrom.op_seq[a]
    for o, op in enumerate(inst.ops_flat):
        if rng.random() < rate:
            new = rng.choice(sorted(op.eligible))
            if new != chrom.machine_asgn[o]:
                chrom.machine_asgn[o] = new
                changed = True
    for o in range(inst.total_operations):
        if rng.random() < rate:
            new = rng.randrange(inst.num_agvs)
            if new != chrom.agv_asgn[o]:
                chrom.agv_asgn[o] = new
                changed = True
    # fresh crossover children have no lists yet (and possibly unrepaired
    # machine genes); their caller attaches lists after repair
    if changed and chrom.task_lists:
        attach_default_task_lists(chrom, inst)
    return chrom


def make_offspring(
    pa: Chromosome, pb: Chromosome, rng: random.Random, inst: Instance, rate: float
) -> tuple[Chromosome, Chromosome]:
    """POX on the sequence, PMX on both assignment layers, mutation, repair."""
    o1, o2 = pox_crossover(pa.op_seq, pb.op_seq, rng)
    m1, m2 = pmx_crossover(pa.machine_asgn, pb.machine_asgn, rng)
    a1, a2 = pmx_crossover(pa.agv_asgn, pb.agv_asgn, rng)
    children = (Chromosome(o1, m1, a1), Chromosome(o2, m2, a2))
    for child in children:
        mutate(child, rate, rng, inst)
        repair_machine_layer(child, inst, rng)
        attach_default_task_lists(child, inst)
    return children


# ---------------------------------------------------------------------------
# cluster-level selection


def roulette_index(means: list[float], rng: random.Random) -> int:
    """Roulette pick favouring lower means; weight = worst - mean + 1."""
    finite = [m for m in means if math.isfinite(m)]
    if finite:
        worst = max(finite)
        weights = [worst - m + 1.0 if math.isfinite(m) else 1.0 for m in means]
    else:
        weights = [1.0] * len(means)
    total = sum(weights)
    pick = rng.random() * total
    acc = 0.0
    for idx, w in enumerate(weights):
        acc += w
        if pick < acc:
            return idx
    return len(means) - 1


def _record_chromosome(rec: SolutionRecord, inst: Instance) -> Chromosome:
    if isinstance(rec.payload, Chromosome):
        return rec.payload.clone()
    return chromosome_from_vector(rec.vector, inst)


def _sample_in_region(region, inst: Instance, rng: random.Random) -> Chromosome | None:
    """Draw a valid chromosome whose vector lies inside the region box."""
    n = inst.total_operations
    for _ in range(_SAMPLE_RETRIES):
        machines = []
        for o, op in enumerate(inst.ops_flat):
            lo, hi = region.low[n + o], region.high[n + o]
            cands = [m for m in sorted(op.eligible) if lo <= m < hi]
            if not cands:
                return None  # machine slots infeasible; retries cannot help
            machines.append(rng.choice(cands))
        agvs = [rng.randrange(region.low[2 * n + o], region.high[2 * n + o]) for o in range(n)]
        remaining = [inst.stages(j) for j in range(inst.num_jobs)]
        seq = []
        for slot in range(n):
            lo, hi = region.low[slot], region.high[slot]
            cands = [j for j in range(lo, hi) if remaining[j] > 0]
            if not cands:
                seq = None
                break
            job = rng.choice(cands)
            seq.append(job)
            remaining[job] -= 1
        if seq is None:
            continue
        return attach_default_task_lists(Chromosome(seq, machines, agvs), inst)
    return None


def generate_subpopulations(
    clusters: list[Cluster],
    tree: GlobalTree,
    inst: Instance,
    n1: int,
    rng: random.Random,
) -> list[list[Chromosome]]:
    """Per cluster: the best recorded members, padded to num_jobs * n1.

    Shortfalls are filled with chromosomes sampled inside the cluster's
    boxes (region picked volume-weighted, bounded retries); if sampling
    keeps failing, a mutated copy of a member stands in, or a fully random
    chromosome for member-less clusters.
    """
    target = inst.num_jobs * n1
    subpops = []
    for cluster in clusters:
        members = sorted(cluster.members(), key=lambda rec: rec.fitness)
        subpop = [_record_chromosome(rec, inst) for rec in members[:target]]
        volumes = [r.volume() for r in cluster.regions]
        while len(subpop) < target:
            region = rng.choices(cluster.regions, weights=volumes)[0]
            sampled = _sample_in_region(region, inst, rng)
            if sampled is None:
                if members:
                    template = _record_chromosome(members[rng.randrange(len(members))], inst)
                    sampled = mutate(template, 0.3, rng, inst)
                else:
                    sampled = random_chromosome(inst, rng)
            subpop.append(sampled)
        subpops.append(subpop)
    return subpops


def explore(
    clusters: list[Cluster],
    n2: int,
    rng: random.Random,
    inst: Instance,
    mutation_rate: float = 0.1,
) -> list[Chromosome]:
    """Cross-cluster offspring: n2 recombinations of two roulette-picked clusters.

    With fewer than two populated clusters each draw falls back to a fully
    random chromosome.
    """
    populated = [c for c in clusters if any(r.records for r in c.regions)]
    offspring = []
    for _ in range(n2):
        if len(populated) >= 2:
            means = [c.mean_fitness for c in populated]
            first = roulette_index(means, rng)
            rest = [k for k in range(len(populated)) if k != first]
            second = rest[roulette_index([means[k] for k in rest], rng)]
            rec_a = rng.choice(populated[first].members())
            rec_b = rng.choice(populated[second].members())
            pa = _record_chromosome(rec_a, inst)
            pb = _record_chromosome(rec_b, inst)
            child, _ = make_offspring(pa, pb, rng, inst, mutation_rate)
        else:
            child = random_chromosome(inst, rng)
        offspring.append(child)
    return offspring


# ---------------------------------------------------------------------------
# main loops


def _pairings(count: int, rng: random.Random) -> list[tuple[int, int]]:
    order = list(range(count))
    rng.shuffle(order)
    return [(order[k], order[k + 1]) for k in range(0, count - 1, 2)]


def run(inst: Instance, params: HrpeoParams) -> RunResult:
    """Full solver run; returns the incumbent, its validated schedule, history.

    Stops at params.generations when set, otherwise at the wall-clock budget
    (params.time_budget_ms, defaulting to jobs x machines x AGVs x 10 ms).
    """
    rng = random.Random(params.rng_seed)
    t_start = time.perf_counter()
    if params.generations is None:
        budget_ms = params.time_budget_ms
        if budget_ms is None:
            budget_ms = inst.num_jobs * inst.num_machines * inst.num_agvs * 10.0
        deadline = Deadline(budget_ms / 1000.0)
    else:
        deadline = Deadline.never()

    tree = GlobalTree.for_instance(inst)
    state = RunState(
        tree=tree, clusters=[], subpops=[], best_chromosome=None,
        best_fitness=math.inf, history=[],
    )

    def elapsed_ms() -> float:
        return (time.perf_counter() - t_start) * 1000.0

    def record(chrom: Chromosome, fitness: float | None = None):
        if fitness is None:
            fitness = decode(chrom, inst).makespan
        region = tree.record(solution_vector(chrom), fitness, chrom)
        if fitness < state.best_fitness:
            state.best_fitness = fitness
            state.best_chromosome = chrom
        return fitness, region

    for chrom in initialize_population(inst, params.n1, rng):
        record(chrom)
    state.history.append(HistoryPoint(0, elapsed_ms(), state.best_fitness))

    generation = 0
    while True:
        if params.generations is not None and generation >= params.generations:
            break
        if deadline.exceeded():
            break
        generation += 1

        # exploitation inside each cluster
        state.subpops = generate_subpopulations(state.clusters, tree, inst, params.n1, rng)
        stop = False
        for subpop in state.subpops:
            for a, b in _pairings(len(subpop), rng):
                if deadline.exceeded():
                    stop = True
                    break
                for child in make_offspring(subpop[a], subpop[b], rng, inst, params.mutation_rate):
                    fitness, region = record(child)
                    improved = conditional_local_search(child, region.mean_fitness, inst, deadline)
                    if improved is not child:
                        record(improved)
            if stop:
                break

        # exploration across clusters
        if not stop:
            for child in explore(state.clusters, params.n2, rng, inst, params.mutation_rate):
                if deadline.exceeded():
                    stop = True
                    break
                record(child)

        if stop:
            state.history.append(HistoryPoint(generation, elapsed_ms(), state.best_fitness))
            break

        # seed identification and region division, cluster refresh
        for cluster in state.clusters:
            members = cluster.members()
            if len(members) > _SEED_SAMPLE_CAP:
                members = sorted(members, key=lambda rec: rec.fitness)[:_SEED_SAMPLE_CAP]
            seeds = identify_seeds(members, params.alpha, params.dedup_distance)
            divide_regions(tree, [(rec.vector, rec.fitness) for rec in seeds.records()])
        state.clusters = group_clusters(tree.leaves(), inst)
        state.history.append(HistoryPoint(generation, elapsed_ms(), state.best_fitness))

    best = state.best_chromosome
    schedule = decode(best, inst)
    report = check_schedule(schedule, best, inst)
    if not report.ok:
        raise RuntimeError(f"best solution failed validation:\n{report.to_text()}")
    return RunResult(best, schedule, state.history, state)


def _tournament(pop: list[tuple[Chromosome, float]], rng: random.Random) -> Chromosome:
    a = rng.randrange(len(pop))
    b = rng.randrange(len(pop))
    return pop[a][0] if pop[a][1] <= pop[b][1] else pop[b][0]


def run_ga_baseline(inst: Instance, params: HrpeoParams) -> RunResult:
    """Ablation baseline: same init, operators and local search, no regions.

    A classic generational GA with size-2 tournament selection and elitist
    truncation; local search is gated on the population's mean fitness
    instead of a region mean.
    """
    rng = random.Random(params.rng_seed)
    t_start = time.perf_counter()
    if params.generations is None:
        budget_ms = params.time_budget_ms
        if budget_ms is None:
            budget_ms = inst.num_jobs * inst.num_machines * inst.num_agvs * 10.0
        deadline = Deadline(budget_ms / 1000.0)
    else:
        deadline = Deadline.never()

    def elapsed_ms() -> float:
        return (time.perf_counter() - t_start) * 1000.0

    pop: list[tuple[Chromosome, float]] = []
    for chrom in initialize_population(inst, params.n1, rng):
        pop.append((chrom, decode(chrom, inst).makespan))
    pop.sort(key=lambda cf: cf[1])
    best_chrom, best_fit = pop[0]
    history = [HistoryPoint(0, elapsed_ms(), best_fit)]
    pop_size = len(pop)

    generation = 0
    while True:
        if params.generations is not None and generation >= params.generations:
            break
        if deadline.exceeded():
            break
        generation += 1
        mean_fit = sum(f for _, f in pop) / len(pop)
        offspring: list[tuple[Chromosome, float]] = []
        while len(offspring) < pop_size:
            if deadline.exceeded():
                break
            pa = _tournament(pop, rng)
            pb = _tournament(pop, rng)
            for child in make_offspring(pa, pb, rng, inst, params.mutation_rate):
                child = conditional_local_search(child, mean_fit, inst, deadline)
                fitness = decode(child, inst).makespan
                offspring.append((child, fitness))
                if fitness < best_fit:
                    best_chrom, best_fit = child, fitness
        pop = sorted(pop + offspring, key=lambda cf: cf[1])[:pop_size]
        history.append(HistoryPoint(generation, elapsed_ms(), best_fit))

    schedule = decode(best_chrom, inst)
    report = check_schedule(schedule, best_chrom, inst)
    if not report.ok:
        raise RuntimeError(f"best solution failed validation:\n{report.to_text()}")
    return RunResult(best_chrom, schedule, history, RunState(
        tree=None, clusters=[], subpops=[], best_chromosome=best_chrom,
        best_fitness=best_fit, history=history,
    ))
