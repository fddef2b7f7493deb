"""Global k-d tree over the integer solution-vector space.

Leaves are regions: axis-aligned boxes of half-open integer intervals
``[low, high)`` holding the solutions recorded inside them and a running
mean fitness (the region's potential).  The tree only grows: regions split
at integer midpoints and are never merged, so knowledge accumulates across
the whole run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .instance import Instance

log = logging.getLogger(__name__)


class SolutionRecord(NamedTuple):
    vector: np.ndarray
    fitness: float
    payload: Any  # typically the chromosome that produced the vector


class Region:
    """Leaf box with its recorded solutions."""

    __slots__ = ("id", "low", "high", "records", "fitness_sum", "_node")

    def __init__(self, region_id: int, low: list[int], high: list[int]):
        self.id = region_id
        self.low = low
        self.high = high
        self.records: list[SolutionRecord] = []
        self.fitness_sum = 0.0
        self._node = None

    @property
    def mean_fitness(self) -> float:
        """Mean recorded fitness; empty regions look as bad as possible."""
        if not self.records:
            return math.inf
        return self.fitness_sum / len(self.records)

    def contains(self, vector) -> bool:
        return all(lo <= v < hi for v, lo, hi in zip(vector, self.low, self.high))

    def width(self, dim: int) -> int:
        return self.high[dim] - self.low[dim]

    def volume(self) -> int:
        vol = 1
        for lo, hi in zip(self.low, self.high):
            vol *= hi - lo
        return vol

    def __repr__(self):
        box = "x".join(f"[{lo},{hi})" for lo, hi in zip(self.low, self.high))
        return f"Region(id={self.id}, box={box}, n={len(self.records)})"


class _Node:
    __slots__ = ("dim", "split", "left", "right", "region", "parent")

    def __init__(self, region: Region, parent=None):
        self.dim = None
        self.split = None
        self.left = None
        self.right = None
        self.region = region
        self.parent = parent
        region._node = self


def regions_adjacent(a: Region, b: Region) -> bool:
    """Axis-aligned adjacency: intervals meet in every dimension, touch in one."""
    touches = False
    for lo_a, hi_a, lo_b, hi_b in zip(a.low, a.high, b.low, b.high):
        lo = max(lo_a, lo_b)
        hi = min(hi_a, hi_b)
        if lo > hi:
            return False
        if lo == hi:
            touches = True
    return touches


def full_range(inst: Instance) -> tuple[list[int], list[int]]:
    """Value range of each solution-vector coordinate.

    Operation-sequence slots span the job ids, machine slots span the
    machine indices, AGV slots span the fleet indices.
    """
    n = inst.total_operations
    low = [0] * (3 * n)
    high = [inst.num_jobs] * n + [inst.num_machines] * n + [inst.num_agvs] * n
    return low, high


class GlobalTree:
    """Single-writer k-d tree recording every searched solution."""

    def __init__(self, low: Sequence[int], high: Sequence[int]):
        if len(low) != len(high) or any(l >= h for l, h in zip(low, high)):
            raise ValueError("box must have low < high in every dimension")
        self.dims = len(low)
        self._next_id = 0
        root = self._new_region(list(low), list(high))
        self.root = _Node(root)
        self._leaves: dict[int, Region] = {root.id: root}
        self.record_count = 0

    @classmethod
    def for_instance(cls, inst: Instance) -> "GlobalTree":
        low, high = full_range(inst)
        return cls(low, high)

    def _new_region(self, low, high) -> Region:
        region = Region(self._next_id, low, high)
        self._next_id += 1
        return region

    def leaves(self) -> list[Region]:
        return list(self._leaves.values())

    def locate(self, vector) -> Region:
        node = self.root
        while node.region is None:
            node = node.left if vector[node.dim] < node.split else node.right
        return node.region

    def record(self, vector, fitness: float, payload: Any = None) -> Region:
        """Drop a solution into its leaf and update the leaf statistics."""
        vector = np.asarray(vector, dtype=np.int64)
        region = self.locate(vector)
        if not region.contains(vector):
            raise ValueError(f"vector {vector.tolist()} outside the tree's root box")
        region.records.append(SolutionRecord(vector, float(fitness), payload))
        region.fitness_sum += float(fitness)
        self.record_count += 1
        return region

    def halve(self, region: Region, dim: int) -> tuple[Region, Region]:
        """Split a leaf at the integer midpoint of one dimension.

        Recorded solutions are redistributed and the children's means
        recomputed.  Raises ValueError on a width-1 dimension (the caller
        must pick another one).
        """
        node = region._node
        if node is None or node.region is not region:
            raise ValueError("region is not a live leaf of this tree")
        lo, hi = region.low[dim], region.high[dim]
        if hi - lo < 2:
            raise ValueError(f"dimension {dim} of region {region.id} has width {hi - lo}; cannot split")
        mid = (lo + hi) // 2
        left_high = list(region.high)
        left_high[dim] = mid
        right_low = list(region.low)
        right_low[dim] = mid
        left = self._new_region(list(region.low), left_high)
        right = self._new_region(right_low, list(region.high))
        for rec in region.records:
            child = left if rec.vector[dim] < mid else right
            child.records.append(rec)
            child.fitness_sum += rec.fitness
        node.dim = dim
        node.split = mid
        node.region = None
        region._node = None
        node.left = _Node(left, parent=node)
        node.right = _Node(right, parent=node)
        del self._leaves[region.id]
        self._leaves[left.id] = left
        self._leaves[right.id] = right
        return left, right


@dataclass
class DivideOutcome:
    splits: int = 0
    exhausted_pairs: int = 0

    @property
    def exhausted(self) -> bool:
        return self.exhausted_pairs > 0


def _max_difference_dim(va, vb) -> int:
    diffs = np.abs(np.asarray(va) - np.asarray(vb))
    return int(np.argmax(diffs))  # argmax breaks ties toward the lowest index


def _boxes_meet_on_dim(a: Region, b: Region, dim: int) -> bool:
    return max(a.low[dim], b.low[dim]) <= min(a.high[dim], b.high[dim])


def divide_regions(tree: GlobalTree, seeds: Iterable[tuple]) -> DivideOutcome:
    """Split regions until no two seed solutions share or neighbour a region.

    Seeds are (vector, fitness) pairs (extra tuple elements are ignored).  A
    pair triggers a split while its regions coincide, or are adjacent and
    still meet along the pair's most-different dimension.  The cut axis is
    the seed set's largest-variance dimension that is splittable in the
    chosen region (ties to the lowest index); the region cut is the shared
    one, or the larger of the two for adjacency conflicts (ties to the lower
    id).  A pair whose every differing dimension has shrunk to width 1 can
    never be separated and is given up on (counted as exhausted).
    """
    vectors = [np.asarray(s[0], dtype=np.int64) for s in seeds]
    outcome = DivideOutcome()
    if len(vectors) < 2:
        return outcome

    stacked = np.stack(vectors)
    variances = stacked.var(axis=0)
    # axes sorted by descending variance, ties to lower index; zero-variance
    # axes can never separate any pair, so they are not candidates
    axis_order = [d for d in np.argsort(-variances, kind="stable") if variances[d] > 0]

    dead_pairs: set[tuple[int, int]] = set()
    while True:
        acted = False
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                if (i, j) in dead_pairs:
                    continue
                va, vb = vectors[i], vectors[j]
                ra = tree.locate(va)
                rb = tree.locate(vb)
                if ra is rb:
                    triggered = True
                elif regions_adjacent(ra, rb):
                    triggered = _boxes_meet_on_dim(ra, rb, _max_difference_dim(va, vb))
                else:
                    triggered = False
                if not triggered:
                    continue
                if not any(
                    va[d] != vb[d] and (ra.width(d) >= 2 or rb.width(d) >= 2)
                    for d in range(tree.dims)
                ):
                    dead_pairs.add((i, j))
                    outcome.exhausted_pairs += 1
                    log.debug("seed pair (%d,%d) cannot be separated further", i, j)
                    continue
                if ra is rb:
                    targets = [ra]
                elif ra.volume() > rb.volume():
                    targets = [ra, rb]
                elif rb.volume() > ra.volume():
                    targets = [rb, ra]
                else:
                    targets = [ra, rb] if ra.id < rb.id else [rb, ra]
                split_done = False
                for target in targets:
                    for dim in axis_order:
                        if target.width(dim) >= 2:
                            tree.halve(target, dim)
                            outcome.splits += 1
                            split_done = True
                            break
                    if split_done:
                        break
                if not split_done:
                    dead_pairs.add((i, j))
                    outcome.exhausted_pairs += 1
                    log.debug("seed pair (%d,%d) has no splittable axis left", i, j)
                    continue
                acted = True
        if not acted:
            break
    return outcome
