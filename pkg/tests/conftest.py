import random

import pytest

from fjspma.instance import generate_random_instance


@pytest.fixture
def rng():
    return random.Random(12345)


@pytest.fixture
def small_instance():
    """4 jobs, 3 machines, 2 AGVs, capacity 2."""
    return generate_random_instance(4, 3, 2, 2, rng_seed=5)


@pytest.fixture
def desk_instance():
    """6 jobs x 3 ops, 4 machines, 2 AGVs, capacity 2."""
    return generate_random_instance(6, 4, 2, 2, rng_seed=9, ops_per_job=3)


@pytest.fixture
def capacity_sweep():
    """One instance per AGV capacity 1..3."""
    return [
        generate_random_instance(5, 3, 2, cap, rng_seed=cap * 7)
        for cap in (1, 2, 3)
    ]
