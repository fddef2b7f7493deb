"""Problem data for flexible job shops served by multi-load AGVs.

An instance holds the jobs with their ordered operations, the machine
eligibility / processing times, a transport-time matrix over the locations
(raw-material warehouse, machines, product warehouse), and the AGV fleet
parameters.  Instances are immutable after construction and safe to share
across workers.

Location indexing convention: location 0 is the raw-material warehouse (MW),
machine m (0-based) sits at location m + 1, and the product warehouse (PW)
is location num_machines + 1.  Instance files use 1-based machine ids; they
are converted to 0-based indices on parse.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

MW_LOCATION = 0


class InstanceFormatError(ValueError):
    """Raised for malformed instance files; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Operation:
    """One processing step of a job.

    eligible maps 0-based machine index to a positive processing time.
    """

    job: int
    stage: int
    eligible: dict[int, float]

    def __post_init__(self):
        if not self.eligible:
            raise ValueError(f"operation ({self.job},{self.stage}) has no eligible machine")
        for m, pt in self.eligible.items():
            if pt <= 0:
                raise ValueError(
                    f"operation ({self.job},{self.stage}) has non-positive time {pt} on machine {m}"
                )


@dataclass
class Instance:
    """Static problem data.  Treat as read-only once constructed."""

    num_jobs: int
    operations: list[list[Operation]]
    num_machines: int
    transport_time: list[list[float]]
    num_agvs: int
    agv_capacity: int
    name: str = "instance"

    # derived, filled in __post_init__
    total_operations: int = field(init=False, repr=False)
    job_offsets: list[int] = field(init=False, repr=False)
    ops_flat: list[Operation] = field(init=False, repr=False)

    def __post_init__(self):
        if self.num_jobs < 1 or self.num_machines < 1:
            raise ValueError("need at least one job and one machine")
        if self.num_agvs < 1:
            raise ValueError("need at least one AGV")
        if self.agv_capacity < 1:
            raise ValueError("AGV capacity must be >= 1")
        if len(self.operations) != self.num_jobs:
            raise ValueError("operations list does not match num_jobs")
        for i, ops in enumerate(self.operations):
            if not ops:
                raise ValueError(f"job {i} has no operations")
            for j, op in enumerate(ops):
                if op.job != i or op.stage != j:
                    raise ValueError(f"operation at job {i} stage {j} is mislabelled")
                for m in op.eligible:
                    if not 0 <= m < self.num_machines:
                        raise ValueError(f"job {i} stage {j}: machine index {m} out of range")
        n_loc = self.num_machines + 2
        if len(self.transport_time) != n_loc or any(len(r) != n_loc for r in self.transport_time):
            raise ValueError(f"transport matrix must be {n_loc}x{n_loc}")
        for a in range(n_loc):
            if self.transport_time[a][a] != 0:
                raise ValueError(f"transport diagonal must be 0 (location {a})")
            for b in range(n_loc):
                if self.transport_time[a][b] < 0:
                    raise ValueError(f"negative transport time at ({a},{b})")
        offsets, flat = [], []
        for ops in self.operations:
            offsets.append(len(flat))
            flat.extend(ops)
        self.job_offsets = offsets
        self.ops_flat = flat
        self.total_operations = len(flat)

    @property
    def pw_location(self) -> int:
        return self.num_machines + 1

    def machine_location(self, machine: int) -> int:
        return machine + 1

    def op_id(self, job: int, stage: int) -> int:
        """Global id of a real operation (jobs laid out contiguously)."""
        return self.job_offsets[job] + stage

    def op_by_id(self, op_id: int) -> Operation:
        return self.ops_flat[op_id]

    def stages(self, job: int) -> int:
        return len(self.operations[job])


def parse_instance(text: str, name: str = "instance") -> Instance:
    """Parse the plain-text instance format.

    Layout::

        jobs=<J> machines=<K> agvs=<R> capacity=<A>
        job <i> ops=<S_i>
        op <j>: <m1>:<pt1> <m2>:<pt2> ...
        ...
        transport
        <(K+2) x (K+2) matrix over MW, M1..MK, PW>

    Machine ids in files are 1-based; `#` starts a comment.  Every rejection
    raises InstanceFormatError with the offending line number.
    """
    lines = []  # (line_no, content)
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            lines.append((no, stripped))
    if not lines:
        raise InstanceFormatError(1, "empty instance file")

    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise InstanceFormatError(lines[-1][0], "unexpected end of file")
        entry = lines[pos]
        pos += 1
        return entry

    no, header = take()
    fields = dict()
    for token in header.split():
        if "=" not in token:
            raise InstanceFormatError(no, f"malformed header token {token!r}")
        key, _, val = token.partition("=")
        fields[key] = val
    try:
        num_jobs = int(fields["jobs"])
        num_machines = int(fields["machines"])
        num_agvs = int(fields["agvs"])
        capacity = int(fields["capacity"])
    except KeyError as exc:
        raise InstanceFormatError(no, f"header missing {exc.args[0]!r}") from None
    except ValueError:
        raise InstanceFormatError(no, "header counts must be integers") from None

    operations: list[list[Operation]] = []
    for i in range(num_jobs):
        no, line = take()
        parts = line.split()
        if len(parts) != 3 or parts[0] != "job" or not parts[2].startswith("ops="):
            raise InstanceFormatError(no, f"expected 'job {i + 1} ops=<n>', got {line!r}")
        if parts[1] != str(i + 1):
            raise InstanceFormatError(no, f"expected job {i + 1}, got {parts[1]}")
        try:
            n_ops = int(parts[2][4:])
        except ValueError:
            raise InstanceFormatError(no, "ops count must be an integer") from None
        if n_ops < 1:
            raise InstanceFormatError(no, "job must have at least one operation")
        ops = []
        for j in range(n_ops):
            no, line = take()
            if not line.startswith("op"):
                raise InstanceFormatError(no, f"expected an op line, got {line!r}")
            head, _, body = line.partition(":")
            tokens = body.split()
            if not tokens:
                raise InstanceFormatError(no, "no eligible machine listed for operation")
            eligible: dict[int, float] = {}
            for token in tokens:
                m_str, _, pt_str = token.partition(":")
                try:
                    machine = int(m_str)
                    pt = float(pt_str)
                except ValueError:
                    raise InstanceFormatError(no, f"malformed machine:time token {token!r}") from None
                if not 1 <= machine <= num_machines:
                    raise InstanceFormatError(no, f"machine id {machine} out of range 1..{num_machines}")
                if pt <= 0:
                    raise InstanceFormatError(no, f"processing time must be positive, got {pt}")
                eligible[machine - 1] = pt
            ops.append(Operation(job=i, stage=j, eligible=eligible))
        operations.append(ops)

    no, line = take()
    if line != "transport":
        raise InstanceFormatError(no, f"expected 'transport' section, got {line!r}")
    n_loc = num_machines + 2
    matrix = []
    for _ in range(n_loc):
        no, line = take()
        row_tok = line.split()
        if len(row_tok) != n_loc:
            raise InstanceFormatError(no, f"transport row has {len(row_tok)} entries, expected {n_loc}")
        try:
            row = [float(v) for v in row_tok]
        except ValueError:
            raise InstanceFormatError(no, "transport entries must be numbers") from None
        for v in row:
            if v < 0:
                raise InstanceFormatError(no, f"negative transport time {v}")
        matrix.append(row)
    if pos < len(lines):
        raise InstanceFormatError(lines[pos][0], f"trailing content {lines[pos][1]!r}")

    try:
        return Instance(
            num_jobs=num_jobs,
            operations=operations,
            num_machines=num_machines,
            transport_time=matrix,
            num_agvs=num_agvs,
            agv_capacity=capacity,
            name=name,
        )
    except ValueError as exc:
        raise InstanceFormatError(no, str(exc)) from None


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def serialize_instance(inst: Instance) -> str:
    """Render an instance in the text format accepted by parse_instance."""
    out = [f"jobs={inst.num_jobs} machines={inst.num_machines} agvs={inst.num_agvs} capacity={inst.agv_capacity}"]
    for i, ops in enumerate(inst.operations):
        out.append(f"job {i + 1} ops={len(ops)}")
        for j, op in enumerate(ops):
            entries = " ".join(f"{m + 1}:{_fmt(pt)}" for m, pt in sorted(op.eligible.items()))
            out.append(f"op {j + 1}: {entries}")
    out.append("transport")
    for row in inst.transport_time:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def generate_random_instance(
    num_jobs: int,
    num_machines: int,
    num_agvs: int,
    capacity: int,
    rng_seed: int,
    ops_per_job: tuple[int, int] | int = (1, 3),
    pt_range: tuple[int, int] = (2, 20),
    tt_range: tuple[int, int] = (1, 9),
) -> Instance:
    """Deterministically generate a valid instance with a symmetric transport matrix."""
    if min(num_jobs, num_machines, num_agvs, capacity) < 1:
        raise ValueError("all counts must be >= 1")
    rng = random.Random(rng_seed)
    if isinstance(ops_per_job, int):
        ops_per_job = (ops_per_job, ops_per_job)
    operations = []
    for i in range(num_jobs):
        n_ops = rng.randint(*ops_per_job)
        ops = []
        for j in range(n_ops):
            k = rng.randint(1, num_machines)
            machines = rng.sample(range(num_machines), k)
            eligible = {m: float(rng.randint(*pt_range)) for m in machines}
            ops.append(Operation(job=i, stage=j, eligible=eligible))
        operations.append(ops)
    n_loc = num_machines + 2
    matrix = [[0.0] * n_loc for _ in range(n_loc)]
    for a in range(n_loc):
        for b in range(a + 1, n_loc):
            t = float(rng.randint(*tt_range))
            matrix[a][b] = t
            matrix[b][a] = t
    return Instance(
        num_jobs=num_jobs,
        operations=operations,
        num_machines=num_machines,
        transport_time=matrix,
        num_agvs=num_agvs,
        agv_capacity=capacity,
        name=f"rand-j{num_jobs}m{num_machines}r{num_agvs}a{capacity}s{rng_seed}",
    )
