import math
import random

import pytest

from fjspma.chromosome import (
    LOAD,
    UNLOAD,
    Chromosome,
    TransportTask,
    attach_default_task_lists,
    decode,
    random_chromosome,
)
from fjspma.instance import Instance, Operation, generate_random_instance
from fjspma.local_search import (
    conditional_local_search,
    greedy_machine_agv_search,
    layer_profile,
    transform_node,
    transformable_nodes,
)


def tasks(*specs):
    return [TransportTask(op, LOAD if sign == "+" else UNLOAD) for sign, op in specs]


def test_layer_profile_levels():
    lst = tasks(("+", 0), ("+", 1), ("-", 0), ("-", 1))
    assert layer_profile(lst, 2) == [1, 2, 1, 0]
    with pytest.raises(ValueError):
        layer_profile(lst, 1)


def test_transformable_capacity_two():
    lst = tasks(("+", 0), ("+", 1), ("-", 0), ("-", 1))
    # load at L2 qualifies; the final unload at L0 is excluded
    assert transformable_nodes(lst, 2) == [1]


def test_transformable_capacity_one_empty():
    lst = tasks(("+", 0), ("-", 0), ("+", 1), ("-", 1))
    assert transformable_nodes(lst, 1) == []


def test_transformable_capacity_three_levels():
    lst = tasks(("+", 0), ("+", 1), ("+", 2), ("-", 0), ("-", 1), ("-", 2))
    # levels 1,2,3,2,1,0: loads at L2/L3 and the non-terminal unload at L1
    assert transformable_nodes(lst, 3) == [1, 2, 4]


def test_transform_load_swaps_with_nearest_following_unload():
    lst = tasks(("+", 0), ("+", 1), ("-", 0), ("-", 1))
    moved = transform_node(lst, 1, 2)
    assert moved == tasks(("+", 0), ("-", 0), ("+", 1), ("-", 1))
    assert layer_profile(moved, 2) == [1, 0, 1, 0]


def test_transform_rejects_pair_inversion():
    # nearest preceding load of -1 is +1 itself: would invert the pair
    lst = tasks(("+", 0), ("-", 0), ("+", 1), ("-", 1), ("+", 2), ("-", 2))
    assert transform_node(lst, 3, 2) is None


def test_transform_outputs_stay_valid():
    rng = random.Random(5)
    inst = generate_random_instance(4, 3, 1, 3, rng_seed=5)
    checked = 0
    for _ in range(100):
        chrom = random_chromosome(inst, rng)
        for r, lst in enumerate(chrom.task_lists):
            for pos in transformable_nodes(lst, inst.agv_capacity):
                moved = transform_node(lst, pos, inst.agv_capacity, inst)
                if moved is None:
                    continue
                layer_profile(moved, inst.agv_capacity)  # raises when invalid
                assert sorted(moved) == sorted(lst)
                checked += 1
    assert checked > 50


def bottleneck_instance():
    """Both jobs prefer machine 0; moving one away is a strict win."""
    return Instance(
        num_jobs=2,
        operations=[
            [Operation(0, 0, {0: 5.0, 1: 6.0})],
            [Operation(1, 0, {0: 5.0, 1: 6.0})],
        ],
        num_machines=2,
        transport_time=[[0] * 4 for _ in range(4)],
        num_agvs=1,
        agv_capacity=2,
    )


def test_greedy_no_alternatives_is_identity():
    inst = Instance(
        num_jobs=1,
        operations=[[Operation(0, 0, {0: 5.0})]],
        num_machines=1,
        transport_time=[[0, 1, 1], [1, 0, 1], [1, 1, 0]],
        num_agvs=1,
        agv_capacity=1,
    )
    chrom = attach_default_task_lists(Chromosome([0], [0], [0]), inst)
    assert greedy_machine_agv_search(chrom, inst) is chrom


def test_greedy_takes_the_improving_machine_move():
    inst = bottleneck_instance()
    chrom = attach_default_task_lists(Chromosome([0, 1], [0, 0], [0, 0]), inst)
    assert decode(chrom, inst).makespan == 10.0
    improved = greedy_machine_agv_search(chrom, inst)
    assert decode(improved, inst).makespan == 6.0
    assert sorted(improved.machine_asgn) == [0, 1]


def test_greedy_never_worsens(small_instance):
    rng = random.Random(6)
    for _ in range(40):
        chrom = random_chromosome(small_instance, rng)
        before = decode(chrom, small_instance).makespan
        after = decode(greedy_machine_agv_search(chrom, small_instance), small_instance).makespan
        assert after <= before


def test_conditional_guard_skips_worse_than_mean(small_instance):
    rng = random.Random(7)
    chrom = random_chromosome(small_instance, rng)
    fitness = decode(chrom, small_instance).makespan
    out = conditional_local_search(chrom, fitness - 1.0, small_instance)
    assert out is chrom  # fitness >= mean: untouched


def test_conditional_improves_bottleneck():
    inst = bottleneck_instance()
    chrom = attach_default_task_lists(Chromosome([0, 1], [0, 0], [0, 0]), inst)
    out = conditional_local_search(chrom, math.inf, inst)
    assert decode(out, inst).makespan < decode(chrom, inst).makespan


def test_conditional_fixpoint_returns_equal_fitness(small_instance):
    rng = random.Random(8)
    chrom = random_chromosome(small_instance, rng)
    once = conditional_local_search(chrom, math.inf, small_instance)
    fitness = decode(once, small_instance).makespan
    twice = conditional_local_search(once, math.inf, small_instance)
    assert decode(twice, small_instance).makespan == fitness
