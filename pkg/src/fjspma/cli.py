"""Command line front end: solve one instance, run a benchmark session,
or generate a random instance file."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evolution import HrpeoParams
from .harness import (
    ALGORITHMS,
    ExperimentConfig,
    arpd,
    export_convergence,
    export_gantt,
    run_experiment,
    run_trial,
)
from .instance import generate_random_instance, parse_instance, serialize_instance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fjspma")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one instance file")
    solve.add_argument("instance")
    group = solve.add_mutually_exclusive_group()
    group.add_argument("--budget-ms", type=float, default=None, help="wall-clock budget per run")
    group.add_argument("--generations", type=int, default=None, help="generation cap (deterministic)")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--n1", type=int, default=6)
    solve.add_argument("--n2", type=int, default=9)
    solve.add_argument("--alpha", type=float, default=3.5)
    solve.add_argument("--mutation", type=float, default=0.1)
    solve.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="hrpeo")
    solve.add_argument("--gantt", metavar="PATH", help="write a gantt text file")
    solve.add_argument("--convergence", metavar="PATH", help="write the convergence curve")
    solve.add_argument("--json", metavar="PATH", help="write a JSON report")

    bench = sub.add_parser("bench", help="run a benchmark session from a JSON config")
    bench.add_argument("config")

    gen = sub.add_parser("gen-instance", help="emit a random instance file")
    gen.add_argument("--jobs", type=int, required=True)
    gen.add_argument("--machines", type=int, required=True)
    gen.add_argument("--agvs", type=int, required=True)
    gen.add_argument("--capacity", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--ops-min", type=int, default=1)
    gen.add_argument("--ops-max", type=int, default=3)
    gen.add_argument("--out", metavar="PATH", help="write here instead of stdout")
    return parser


def _cmd_solve(args) -> int:
    inst = parse_instance(Path(args.instance).read_text(), name=Path(args.instance).stem)
    params = HrpeoParams(
        n1=args.n1,
        n2=args.n2,
        alpha=args.alpha,
        mutation_rate=args.mutation,
        time_budget_ms=args.budget_ms,
        generations=args.generations,
    )
    result, millis = run_trial(inst, args.algorithm, args.seed, params)
    print(f"instance   {inst.name}")
    print(f"algorithm  {args.algorithm}")
    print(f"makespan   {result.schedule.makespan:g}")
    print(f"elapsed    {millis:.0f} ms over {result.history[-1].generation} generation(s)")
    if args.gantt:
        export_gantt(result.schedule, result.chromosome, inst, args.gantt)
        print(f"gantt      {args.gantt}")
    if args.convergence:
        export_convergence(result.history, args.convergence)
        print(f"curve      {args.convergence}")
    if args.json:
        payload = {
            "instance": args.instance,
            "algorithm": args.algorithm,
            "trials": [{"seed": args.seed, "makespan": result.schedule.makespan, "millis": millis}],
            "c_best": result.schedule.makespan,
            "arpd_percent": arpd([result.schedule.makespan], result.schedule.makespan),
        }
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"report     {args.json}")
    return 0


def _cmd_bench(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    reports = run_experiment(config)
    if not reports:
        print("no reports produced")
        return 1
    width = max(len(r.instance) for r in reports)
    for report in reports:
        best = min(t.makespan for t in report.trials)
        print(
            f"{report.instance:<{width}}  {report.algorithm:<11}  "
            f"best {best:<8g} c_best {report.c_best:<8g} ARPD {report.arpd_percent:.3f}%"
        )
    return 0


def _cmd_gen_instance(args) -> int:
    inst = generate_random_instance(
        args.jobs,
        args.machines,
        args.agvs,
        args.capacity,
        args.seed,
        ops_per_job=(args.ops_min, args.ops_max),
    )
    text = serialize_instance(inst)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    return _cmd_gen_instance(args)


if __name__ == "__main__":
    raise SystemExit(main())
