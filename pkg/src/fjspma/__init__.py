"""Flexible job shop scheduling with limited multi-load AGVs.

Library layout:

* ``instance``     -- problem data, text format, random generator
* ``chromosome``   -- three-layer encoding, container rule, decoder
* ``validation``   -- independent feasibility checks for schedules
* ``regions``      -- global k-d tree over the solution-vector space
* ``niching``      -- nearest-better distances, seeds, region clusters
* ``local_search`` -- greedy reassignment and transport-node moves
* ``evolution``    -- the region-partitioning solver and a GA baseline
* ``harness``      -- trials, ARPD, gantt/convergence exports
* ``cli``          -- `fjspma solve | bench | gen-instance`
"""

from .chromosome import (
    Chromosome,
    Schedule,
    TransportTask,
    build_default_task_lists,
    decode,
    random_chromosome,
    repair_machine_layer,
    solution_vector,
)
from .evolution import HrpeoParams, RunResult, run, run_ga_baseline
from .harness import arpd, default_time_budget, export_convergence, export_gantt, run_experiment
from .instance import (
    Instance,
    Operation,
    generate_random_instance,
    parse_instance,
    serialize_instance,
)
from .niching import group_clusters, identify_seeds, nbd
from .regions import GlobalTree, divide_regions, full_range
from .validation import ViolationReport, check_schedule

__all__ = [
    "Chromosome",
    "GlobalTree",
    "HrpeoParams",
    "Instance",
    "Operation",
    "RunResult",
    "Schedule",
    "TransportTask",
    "ViolationReport",
    "arpd",
    "build_default_task_lists",
    "check_schedule",
    "decode",
    "default_time_budget",
    "divide_regions",
    "export_convergence",
    "export_gantt",
    "full_range",
    "generate_random_instance",
    "group_clusters",
    "identify_seeds",
    "nbd",
    "parse_instance",
    "random_chromosome",
    "repair_machine_layer",
    "run",
    "run_experiment",
    "run_ga_baseline",
    "serialize_instance",
    "solution_vector",
]

__version__ = "0.1.0"
