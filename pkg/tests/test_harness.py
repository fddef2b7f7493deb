import json
import re
from pathlib import Path

import pytest

from fjspma import cli
from fjspma.chromosome import Chromosome, attach_default_task_lists, decode
from fjspma.evolution import HistoryPoint, HrpeoParams, run
from fjspma.harness import (
    ExperimentConfig,
    arpd,
    default_time_budget,
    export_convergence,
    export_gantt,
    run_experiment,
)
from fjspma.instance import (
    Instance,
    Operation,
    generate_random_instance,
    parse_instance,
    serialize_instance,
)


def test_arpd_hand_computed():
    assert arpd([110.0, 105.0], 100.0) == pytest.approx(7.5, abs=1e-12)
    assert arpd([100.0], 100.0) == 0.0
    assert arpd([50.0, 50.0, 50.0], 50.0) == 0.0


def test_arpd_scale_invariance():
    values = [123.0, 150.5, 137.25]
    base = arpd(values, 120.0) / 100.0
    for k in (2.0, 0.5, 1e6):
        scaled = arpd([v * k for v in values], 120.0 * k) / 100.0
        assert abs(scaled - base) < 1e-12


def test_arpd_rejects_bad_inputs():
    with pytest.raises(ValueError):
        arpd([], 10.0)
    with pytest.raises(ValueError):
        arpd([5.0], 0.0)
    with pytest.raises(ValueError):
        arpd([5.0], 10.0)


def test_default_time_budget():
    assert default_time_budget(generate_random_instance(10, 5, 2, 2, rng_seed=1)) == 1000.0
    assert default_time_budget(generate_random_instance(1, 1, 1, 1, rng_seed=1)) == 10.0
    a = default_time_budget(generate_random_instance(4, 3, 2, 2, rng_seed=1))
    b = default_time_budget(generate_random_instance(8, 3, 2, 2, rng_seed=1))
    assert b == 2 * a


def trivial_result():
    inst = Instance(
        num_jobs=1,
        operations=[[Operation(0, 0, {0: 5.0})]],
        num_machines=1,
        transport_time=[[0, 2, 5], [2, 0, 3], [5, 3, 0]],
        num_agvs=1,
        agv_capacity=1,
    )
    chrom = attach_default_task_lists(Chromosome([0], [0], [0]), inst)
    return inst, chrom, decode(chrom, inst)


def test_export_gantt_trivial_schedule(tmp_path):
    inst, chrom, schedule = trivial_result()
    path = tmp_path / "gantt.txt"
    export_gantt(schedule, chrom, inst, str(path))
    lines = path.read_text().splitlines()
    machine_lines = [l for l in lines if l.startswith("machine")]
    agv_lines = [l for l in lines if l.startswith("agv")]
    assert len(machine_lines) == 1
    assert len(agv_lines) == 4  # load/unload to the machine, then to PW
    assert lines[0].endswith("makespan=10")


def test_export_gantt_roundtrips_numbers(tmp_path, small_instance, rng):
    from fjspma.chromosome import random_chromosome

    chrom = random_chromosome(small_instance, rng)
    schedule = decode(chrom, small_instance)
    path = tmp_path / "gantt.txt"
    export_gantt(schedule, chrom, small_instance, str(path))
    text = path.read_text()
    starts = [float(m) for m in re.findall(r"start (\S+)", text)]
    ends = [float(m) for m in re.findall(r"end (\S+)", text)]
    # machine lines cover the real operations; AGV lines cover every trace entry
    n = small_instance.total_operations
    expected_starts = sorted(
        [schedule.op_start[o] for o in range(n)]
        + [e.start for tr in schedule.agv_traces for e in tr]
    )
    expected_ends = sorted(
        [schedule.op_end[o] for o in range(n)]
        + [e.end for tr in schedule.agv_traces for e in tr]
    )
    assert sorted(starts) == expected_starts
    assert sorted(ends) == expected_ends


def test_export_gantt_refuses_invalid(tmp_path):
    inst, chrom, schedule = trivial_result()
    schedule.op_start[0] -= 1.0
    with pytest.raises(ValueError, match="infeasible"):
        export_gantt(schedule, chrom, inst, str(tmp_path / "bad.txt"))


def test_export_convergence_roundtrip(tmp_path):
    history = [
        HistoryPoint(0, 1.5, 42.0),
        HistoryPoint(1, 20.25, 40.0),
        HistoryPoint(2, 31.0, 40.0),
    ]
    path = tmp_path / "curve.csv"
    export_convergence(history, str(path))
    rows = [line.split(",") for line in path.read_text().splitlines()]
    assert [(float(a), float(b)) for a, b in rows] == [
        (p.elapsed_ms, p.best_makespan) for p in history
    ]
    col = [float(b) for _, b in rows]
    assert all(x >= y for x, y in zip(col, col[1:]))


def test_export_convergence_single_row(tmp_path):
    path = tmp_path / "one.csv"
    export_convergence([HistoryPoint(0, 3.0, 17.0)], str(path))
    assert len(path.read_text().splitlines()) == 1
    with pytest.raises(ValueError):
        export_convergence([], str(path))


def write_instance(tmp_path, name="inst.txt", **kwargs):
    inst = generate_random_instance(**kwargs)
    path = tmp_path / name
    path.write_text(serialize_instance(inst))
    return path


def test_run_experiment_reproducible(tmp_path):
    path = write_instance(tmp_path, num_jobs=2, num_machines=2, num_agvs=1, capacity=2, rng_seed=3)
    config = ExperimentConfig(
        instances=[str(path)],
        algorithms=["hrpeo"],
        repetitions=1,
        params=HrpeoParams(rng_seed=1),
        generations=3,
    )
    a = run_experiment(config)
    b = run_experiment(config)
    strip = lambda reports: [
        (r.instance, r.algorithm, r.c_best, r.arpd_percent, [t.makespan for t in r.trials])
        for r in reports
    ]
    assert strip(a) == strip(b)


def test_run_experiment_json_schema(tmp_path):
    path = write_instance(tmp_path, num_jobs=2, num_machines=2, num_agvs=1, capacity=2, rng_seed=4)
    out = tmp_path / "reports"
    config = ExperimentConfig(
        instances=[str(path)],
        algorithms=["hrpeo", "ga-baseline"],
        repetitions=2,
        params=HrpeoParams(rng_seed=2),
        generations=2,
        output_dir=str(out),
    )
    reports = run_experiment(config)
    assert {r.algorithm for r in reports} == {"hrpeo", "ga-baseline"}
    shared_best = {r.c_best for r in reports}
    assert len(shared_best) == 1  # session-level best
    for report in reports:
        data = json.loads((out / f"{path.stem}_{report.algorithm}.json").read_text())
        assert set(data) >= {"instance", "algorithm", "trials", "c_best", "arpd_percent"}
        assert all(set(t) == {"seed", "makespan", "millis"} for t in data["trials"])
        assert data["arpd_percent"] >= 0
        assert min(t["makespan"] for t in data["trials"]) >= data["c_best"]


def test_run_experiment_isolates_bad_instances(tmp_path, capsys):
    good = write_instance(tmp_path, num_jobs=2, num_machines=2, num_agvs=1, capacity=1, rng_seed=5)
    bad = tmp_path / "broken.txt"
    bad.write_text("jobs=banana\n")
    config = ExperimentConfig(
        instances=[str(bad), str(good)],
        repetitions=1,
        params=HrpeoParams(rng_seed=1),
        generations=1,
    )
    reports = run_experiment(config)
    assert len(reports) == 1
    assert reports[0].instance == str(good)
    assert "broken.txt" in capsys.readouterr().out


def test_experiment_config_validation(tmp_path):
    with pytest.raises(ValueError, match="repetitions"):
        ExperimentConfig(instances=[], repetitions=0)
    with pytest.raises(ValueError, match="unknown algorithm"):
        ExperimentConfig(instances=[], algorithms=["simulated-annealing"])


def test_cli_gen_instance_roundtrip(tmp_path, capsys):
    out = tmp_path / "gen.txt"
    code = cli.main([
        "gen-instance", "--jobs", "3", "--machines", "2", "--agvs", "2",
        "--capacity", "2", "--seed", "11", "--out", str(out),
    ])
    assert code == 0
    inst = parse_instance(out.read_text())
    assert inst.num_jobs == 3 and inst.num_machines == 2
    capsys.readouterr()

    code = cli.main([
        "gen-instance", "--jobs", "1", "--machines", "1", "--agvs", "1", "--capacity", "1",
    ])
    assert code == 0
    assert parse_instance(capsys.readouterr().out).num_jobs == 1


def test_cli_solve_writes_outputs(tmp_path, capsys):
    path = write_instance(tmp_path, num_jobs=2, num_machines=2, num_agvs=1, capacity=2, rng_seed=6)
    gantt = tmp_path / "g.txt"
    curve = tmp_path / "c.csv"
    report = tmp_path / "r.json"
    code = cli.main([
        "solve", str(path), "--generations", "2", "--seed", "7",
        "--gantt", str(gantt), "--convergence", str(curve), "--json", str(report),
    ])
    assert code == 0
    assert "makespan" in capsys.readouterr().out
    assert gantt.exists() and curve.exists()
    data = json.loads(report.read_text())
    assert data["algorithm"] == "hrpeo"
    assert data["trials"][0]["seed"] == 7


def test_cli_bench(tmp_path, capsys):
    path = write_instance(tmp_path, num_jobs=2, num_machines=2, num_agvs=1, capacity=2, rng_seed=8)
    config = {
        "instances": [str(path)],
        "algorithms": ["hrpeo", "ga-baseline"],
        "repetitions": 1,
        "generations": 2,
        "seed": 3,
    }
    cfg_path = tmp_path / "session.json"
    cfg_path.write_text(json.dumps(config))
    assert cli.main(["bench", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "hrpeo" in out and "ga-baseline" in out and "ARPD" in out
