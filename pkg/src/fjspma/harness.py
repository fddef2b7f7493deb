"""Experiment orchestration: trials, ARPD aggregation, result exports.

A session runs R seeded trials of one or more algorithms per instance under
a shared wall-clock budget (or generation cap) and reports the average
relative percentage deviation of each trial's makespan from the best
makespan seen anywhere in the session for that instance.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .chromosome import LOAD, Chromosome, Schedule, is_terminal, job_of_op
from .evolution import HistoryPoint, HrpeoParams, RunResult, run, run_ga_baseline
from .instance import Instance, parse_instance
from .validation import check_schedule

ALGORITHMS = {
    "hrpeo": run,
    "ga-baseline": run_ga_baseline,
}


def arpd(makespans: list[float], c_best: float) -> float:
    """Average relative percentage deviation, in percent.

    100/R * sum((C_i - C_best) / C_best); the raw ratio is this value / 100.
    """
    if not makespans:
        raise ValueError("need at least one makespan")
    if c_best <= 0:
        raise ValueError("c_best must be positive")
    for c in makespans:
        if c < c_best:
            raise ValueError(f"makespan {c} below c_best {c_best}")
    return 100.0 * sum((c - c_best) / c_best for c in makespans) / len(makespans)


def default_time_budget(inst: Instance) -> float:
    """Per-trial wall-clock budget in milliseconds: jobs x machines x AGVs x 10."""
    return inst.num_jobs * inst.num_machines * inst.num_agvs * 10.0


@dataclass
class ExperimentConfig:
    instances: list[str]
    algorithms: list[str] = field(default_factory=lambda: ["hrpeo"])
    repetitions: int = 20
    params: HrpeoParams = field(default_factory=HrpeoParams)
    output_dir: str | None = None
    budget_ms: float | None = None
    generations: int | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}")

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        params = HrpeoParams(
            n1=raw.get("n1", 6),
            n2=raw.get("n2", 9),
            alpha=raw.get("alpha", 3.5),
            mutation_rate=raw.get("mutation", 0.1),
            rng_seed=raw.get("seed", 0),
        )
        return cls(
            instances=raw["instances"],
            algorithms=raw.get("algorithms", ["hrpeo"]),
            repetitions=raw.get("repetitions", 20),
            params=params,
            output_dir=raw.get("output_dir"),
            budget_ms=raw.get("budget_ms"),
            generations=raw.get("generations"),
        )


@dataclass
class TrialResult:
    seed: int
    makespan: float
    millis: float
    history: list[HistoryPoint]


@dataclass
class RunReport:
    instance: str
    algorithm: str
    trials: list[TrialResult]
    c_best: float
    arpd_percent: float

    @property
    def arpd_ratio(self) -> float:
        return self.arpd_percent / 100.0

    def to_json_dict(self) -> dict:
        return {
            "instance": self.instance,
            "algorithm": self.algorithm,
            "trials": [
                {"seed": t.seed, "makespan": t.makespan, "millis": t.millis}
                for t in self.trials
            ],
            "c_best": self.c_best,
            "arpd_percent": self.arpd_percent,
            "arpd_ratio": self.arpd_ratio,
        }


def run_trial(inst: Instance, algorithm: str, seed: int, params: HrpeoParams) -> tuple[RunResult, float]:
    """One seeded trial; returns the result and its wall-clock milliseconds."""
    trial_params = replace(params, rng_seed=seed)
    t0 = time.perf_counter()
    result = ALGORITHMS[algorithm](inst, trial_params)
    millis = (time.perf_counter() - t0) * 1000.0
    return result, millis


def run_experiment(config: ExperimentConfig) -> list[RunReport]:
    """Run the whole session and write one JSON report per (instance, algorithm).

    The ARPD baseline for an instance is the best makespan across every
    trial of every algorithm in the session.  Failures on one instance are
    reported and do not stop the rest.
    """
    reports: list[RunReport] = []
    out_dir = Path(config.output_dir) if config.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for path in config.instances:
        try:
            inst = parse_instance(Path(path).read_text(), name=Path(path).stem)
        except (OSError, ValueError) as exc:
            print(f"skipping {path}: {exc}")
            continue
        params = replace(
            config.params,
            time_budget_ms=config.budget_ms,
            generations=config.generations,
        )
        per_algo: dict[str, list[TrialResult]] = {}
        failed = False
        for algo in config.algorithms:
            trials = []
            for rep in range(config.repetitions):
                seed = config.params.rng_seed * 10_000 + rep
                try:
                    result, millis = run_trial(inst, algo, seed, params)
                except Exception as exc:  # isolate per-instance failures
                    print(f"{path} [{algo} seed {seed}] failed: {exc}")
                    failed = True
                    break
                trials.append(
                    TrialResult(seed, result.schedule.makespan, millis, result.history)
                )
            if failed:
                break
            per_algo[algo] = trials
        if failed or not per_algo:
            continue
        c_best = min(t.makespan for trials in per_algo.values() for t in trials)
        for algo, trials in per_algo.items():
            report = RunReport(
                instance=path,
                algorithm=algo,
                trials=trials,
                c_best=c_best,
                arpd_percent=arpd([t.makespan for t in trials], c_best),
            )
            reports.append(report)
            if out_dir:
                name = f"{Path(path).stem}_{algo}.json"
                (out_dir / name).write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
    return reports


def _fmt_time(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def _loc_name(inst: Instance, loc: int) -> str:
    if loc == 0:
        return "MW"
    if loc == inst.pw_location:
        return "PW"
    return f"M{loc}"


def export_gantt(schedule: Schedule, chrom: Chromosome, inst: Instance, path: str) -> None:
    """Write a plot-ready, line-oriented description of a validated schedule.

    Machine lines carry the processing windows; AGV lines carry each
    transport task with its endpoints and the job set on board during the
    move.  Schedules that fail validation are refused.
    """
    report = check_schedule(schedule, chrom, inst)
    if not report.ok:
        raise ValueError(f"refusing to export an infeasible schedule:\n{report.to_text()}")
    lines = [f"gantt instance={inst.name} makespan={_fmt_time(schedule.makespan)}"]
    per_machine: dict[int, list[int]] = {}
    for o in range(inst.total_operations):
        per_machine.setdefault(chrom.machine_asgn[o], []).append(o)
    for m in sorted(per_machine):
        for o in sorted(per_machine[m], key=lambda o: schedule.op_start[o]):
            op = inst.ops_flat[o]
            lines.append(
                f"machine {m + 1} op {op.job + 1}.{op.stage + 1} "
                f"start {_fmt_time(schedule.op_start[o])} end {_fmt_time(schedule.op_end[o])}"
            )
    for r, trace in enumerate(schedule.agv_traces):
        onboard: list[int] = []
        for entry in trace:
            job = job_of_op(inst, entry.task.op)
            carrying = sorted(set(onboard))
            label = ",".join(str(j + 1) for j in carrying) if carrying else "-"
            kind = "load" if entry.task.kind == LOAD else "unload"
            stage = "T" if is_terminal(inst, entry.task.op) else str(
                inst.ops_flat[entry.task.op].stage + 1
            )
            lines.append(
                f"agv {r + 1} {kind} {job + 1}.{stage} "
                f"start {_fmt_time(entry.start)} end {_fmt_time(entry.end)} "
                f"from {_loc_name(inst, entry.from_loc)} to {_loc_name(inst, entry.to_loc)} "
                f"onboard {label}"
            )
            if entry.task.kind == LOAD:
                onboard.append(job)
            else:
                onboard.remove(job)
    Path(path).write_text("\n".join(lines) + "\n")


def export_convergence(history: list[HistoryPoint], path: str) -> None:
    """Comma-separated (elapsed-ms, best-makespan) rows; best is non-increasing."""
    if not history:
        raise ValueError("history is empty; nothing to export")
    rows = [f"{point.elapsed_ms!r},{point.best_makespan!r}" for point in history]
    Path(path).write_text("\n".join(rows) + "\n")
