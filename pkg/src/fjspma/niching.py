"""Nearest-better distances, seed detection, and region clustering.

A solution's nearest-better distance (NBD) is the Euclidean distance to the
closest strictly better solution in its set; the set's best gets an infinite
sentinel.  Solutions whose NBD sticks out of the distribution (above
mean + alpha * std over the finite values) are isolated local optima --
"seeds" -- and drive region division.  Clusters are adjacency-connected
groups of regions grown downhill-to-uphill from the best remaining region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Instance
from .regions import Region, SolutionRecord, regions_adjacent

DEFAULT_DEDUP_DISTANCE = 2.0


def nbd(item: tuple, solutions: list) -> float:
    """Nearest-better distance of one (vector, fitness, ...) item within its set."""
    vector = np.asarray(item[0], dtype=float)
    fitness = item[1]
    best = math.inf
    for other in solutions:
        if other[1] < fitness:
            d = float(np.linalg.norm(vector - np.asarray(other[0], dtype=float)))
            best = min(best, d)
    return best


def nbd_all(solutions: list) -> np.ndarray:
    """NBD of every member, computed with one pairwise distance matrix."""
    n = len(solutions)
    if n == 0:
        return np.empty(0)
    vectors = np.stack([np.asarray(s[0], dtype=float) for s in solutions])
    fitness = np.asarray([s[1] for s in solutions], dtype=float)
    sq = np.sum(vectors**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (vectors @ vectors.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    better = fitness[None, :] < fitness[:, None]  # better[i, k]: k strictly better than i
    dist_masked = np.where(better, dist, np.inf)
    return dist_masked.min(axis=1, initial=np.inf)


@dataclass
class SeedSet:
    """Seed solutions with the NBD values that flagged them."""

    seeds: list[tuple] = field(default_factory=list)  # (record, nbd_value)

    def __len__(self):
        return len(self.seeds)

    def records(self) -> list:
        return [rec for rec, _ in self.seeds]


def identify_seeds(
    solutions: list,
    alpha: float,
    dedup_distance: float = DEFAULT_DEDUP_DISTANCE,
) -> SeedSet:
    """Flag NBD outliers as seeds and drop near-duplicates, keeping the fitter.

    The threshold statistics use only the finite NBD values; infinite-NBD
    solutions (nothing beats them) are unconditionally flagged, which keeps
    the set's best solution in every nonempty result.
    """
    if not solutions:
        return SeedSet()
    if len(solutions) == 1:
        return SeedSet([(solutions[0], math.inf)])
    values = nbd_all(solutions)
    finite = values[np.isfinite(values)]
    if finite.size:
        threshold = float(finite.mean() + alpha * finite.std())
    else:
        threshold = math.inf
    flagged = [
        (solutions[i], float(values[i]))
        for i in range(len(solutions))
        if not math.isfinite(values[i]) or values[i] > threshold
    ]
    flagged.sort(key=lambda pair: pair[0][1])  # fittest first; stable on ties
    kept: list[tuple] = []
    for rec, value in flagged:
        vec = np.asarray(rec[0], dtype=float)
        if all(
            np.linalg.norm(vec - np.asarray(k[0], dtype=float)) > dedup_distance
            for k, _ in kept
        ):
            kept.append((rec, value))
    return SeedSet(kept)


@dataclass
class Cluster:
    """Connected set of regions plus the solutions recorded in them."""

    regions: list[Region]

    @property
    def mean_fitness(self) -> float:
        count = sum(len(r.records) for r in self.regions)
        if count == 0:
            return math.inf
        return sum(r.fitness_sum for r in self.regions) / count

    def members(self) -> list[SolutionRecord]:
        out = []
        for r in self.regions:
            out.extend(r.records)
        return out

    def region_ids(self) -> set[int]:
        return {r.id for r in self.regions}


def _adjacency_matrix(regions: list[Region]) -> np.ndarray:
    """Pairwise adjacency over leaf boxes, vectorised."""
    lows = np.asarray([r.low for r in regions], dtype=np.int64)
    highs = np.asarray([r.high for r in regions], dtype=np.int64)
    lo = np.maximum(lows[:, None, :], lows[None, :, :])
    hi = np.minimum(highs[:, None, :], highs[None, :, :])
    meets = np.all(lo <= hi, axis=2)
    touches = np.any(lo == hi, axis=2)
    adj = meets & touches
    np.fill_diagonal(adj, False)
    return adj


def region_is_infeasible(region: Region, inst: Instance | None) -> bool:
    """True when no valid encoding can live inside the box.

    Covers empty intervals and machine slots whose interval misses every
    eligible machine of the slot's operation.  Deeper sequencing-based
    infeasibility is not attempted.
    """
    if any(hi - lo <= 0 for lo, hi in zip(region.low, region.high)):
        return True
    if inst is None:
        return False
    n = inst.total_operations
    for o, op in enumerate(inst.ops_flat):
        lo, hi = region.low[n + o], region.high[n + o]
        if not any(lo <= m < hi for m in op.eligible):
            return True
    return False


def find_neighborhood(
    start: Region,
    regions: list[Region],
    visited: set[int],
    adjacency: dict[int, list[Region]] | None = None,
) -> Cluster:
    """Grow a cluster from a region, absorbing neighbours that are not better.

    Depth-first: every adjacent unvisited region whose mean fitness is >=
    the current frontier region's mean joins the cluster and is explored in
    turn.  Absorbed regions are marked in `visited`.
    """
    if adjacency is None:
        adjacency = {
            r.id: [s for s in regions if s is not r and regions_adjacent(r, s)]
            for r in regions
        }
    cluster = Cluster(regions=[])
    stack = [start]
    visited.add(start.id)
    while stack:
        current = stack.pop()
        cluster.regions.append(current)
        for neighbour in adjacency[current.id]:
            if neighbour.id in visited:
                continue
            if neighbour.mean_fitness >= current.mean_fitness:
                visited.add(neighbour.id)
                stack.append(neighbour)
    return cluster


def group_clusters(regions: list[Region], inst: Instance | None = None) -> list[Cluster]:
    """Partition the surviving regions into clusters.

    Provably infeasible regions are dropped; the rest are taken best mean
    first, each unassigned one seeding a cluster grown by find_neighborhood.
    """
    survivors = [r for r in regions if not region_is_infeasible(r, inst)]
    if not survivors:
        return []
    adj_matrix = _adjacency_matrix(survivors)
    adjacency = {
        r.id: [survivors[j] for j in np.flatnonzero(adj_matrix[i])]
        for i, r in enumerate(survivors)
    }
    order = sorted(survivors, key=lambda r: (r.mean_fitness, r.id))
    visited: set[int] = set()
    clusters = []
    for region in order:
        if region.id in visited:
            continue
        clusters.append(find_neighborhood(region, survivors, visited, adjacency))
    return clusters
