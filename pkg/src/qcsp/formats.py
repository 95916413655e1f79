"""Text formats: the canonical instance file, routing and schedule blocks,
and adapters for third-party benchmark layouts."""

from __future__ import annotations

import re

from .model import KINDS, Crane, Instance, InstanceError, Routing, Schedule, Task, make_instance


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        loc = f"line {line}, column {column}: " if line else ""
        super().__init__(f"{loc}{message}")


def _tokens(raw: str):
    """Yield (token, column) pairs of a line with comments stripped."""
    body = raw.split("#", 1)[0]
    for m in re.finditer(r"\S+", body):
        yield m.group(), m.start() + 1


def _ints(toks, lineno, count):
    if len(toks) != count:
        col = toks[-1][1] if toks else 1
        raise ParseError(f"expected {count} fields, got {len(toks)}", lineno, col)
    out = []
    for tok, col in toks:
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"not an integer: {tok!r}", lineno, col) from None
    return out


def parse_instance(text: str) -> Instance:
    """Parse the canonical ``QCSP 1`` instance format."""
    lines = [(no, list(_tokens(raw))) for no, raw in enumerate(text.splitlines(), 1)]
    lines = [(no, toks) for no, toks in lines if toks]
    if not lines:
        raise ParseError("empty file", 1, 1)
    no, toks = lines[0]
    if [t for t, _ in toks] != ["QCSP", "1"]:
        raise ParseError("expected header 'QCSP 1'", no, toks[0][1])
    if len(lines) < 2:
        raise ParseError("missing size line", no, 1)
    no, toks = lines[1]
    n, q, B, safety, tunit = _ints(toks, no, 5)
    if n < 0 or q < 1 or B < 1:
        raise ParseError("need n >= 0, q >= 1, B >= 1", no, 1)
    tasks: dict[int, Task] = {}
    cranes: dict[int, Crane] = {}
    prec: list[tuple[int, int]] = []
    nsim: list[tuple[int, int, int, int]] = []
    for no, toks in lines[2:]:
        key, col = toks[0]
        rest = toks[1:]
        if key == "TASK":
            kind = None
            if len(rest) == 4:
                kind, kcol = rest[3]
                if kind not in KINDS:
                    raise ParseError(f"unknown task kind {kind!r}", no, kcol)
                rest = rest[:3]
            i, bay, p = _ints(rest, no, 3)
            if i in tasks:
                raise ParseError(f"duplicate task id {i}", no, rest[0][1])
            if not 1 <= i <= n:
                raise ParseError(f"task id {i} outside 1..{n}", no, rest[0][1])
            if not 1 <= bay <= B:
                raise ParseError(f"bay {bay} outside 1..{B}", no, rest[1][1])
            if p < 0:
                raise ParseError("negative processing time", no, rest[2][1])
            tasks[i] = Task(i, bay, p, kind)
        elif key == "CRANE":
            k, r, l0, lT = _ints(rest, no, 4)
            if k in cranes:
                raise ParseError(f"duplicate crane id {k}", no, rest[0][1])
            if not 1 <= k <= q:
                raise ParseError(f"crane id {k} outside 1..{q}", no, rest[0][1])
            if r < 0:
                raise ParseError("negative ready time", no, rest[1][1])
            for val, (_, c) in ((l0, rest[2]), (lT, rest[3])):
                if not 0 <= val <= B:
                    raise ParseError(f"bay {val} outside 0..{B}", no, c)
            cranes[k] = Crane(k, r, l0, lT)
        elif key in ("PREC", "NSIM"):
            i, j = _ints(rest, no, 2)
            for val, (_, c) in ((i, rest[0]), (j, rest[1])):
                if not 1 <= val <= n:
                    raise ParseError(f"task id {val} outside 1..{n}", no, c)
            if i == j:
                raise ParseError("pair of identical tasks", no, rest[1][1])
            if key == "PREC":
                prec.append((i, j))
            else:
                nsim.append((i, j, no, rest[0][1]))
        else:
            raise ParseError(f"unknown record {key!r}", no, col)
    if len(tasks) != n:
        raise ParseError(f"expected {n} TASK lines, got {len(tasks)}", lines[-1][0], 1)
    if len(cranes) != q:
        raise ParseError(f"expected {q} CRANE lines, got {len(cranes)}", lines[-1][0], 1)
    loc = {i: t.bay for i, t in tasks.items()}
    pset = {frozenset(pr) for pr in prec}
    for i, j, no, col in nsim:
        if loc[i] == loc[j]:
            raise ParseError(f"NSIM {i} {j}: same-bay pairs are implied", no, col)
        if frozenset((i, j)) in pset:
            raise ParseError(f"NSIM {i} {j}: precedence pairs are implied", no, col)
    try:
        return make_instance(
            [tasks[i] for i in sorted(tasks)],
            [cranes[k] for k in sorted(cranes)],
            B,
            safety,
            tunit,
            prec,
            [(i, j) for i, j, _, _ in nsim],
        )
    except InstanceError as exc:
        raise ParseError(str(exc), 1, 1) from None


def format_instance(inst: Instance, comment: str | None = None) -> str:
    """Serialize ``inst`` canonically; implied NSIM pairs are omitted."""
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append("QCSP 1")
    out.append(f"{inst.n} {inst.q} {inst.bays} {inst.safety} {inst.travel_unit}")
    for t in inst.tasks:
        kind = f" {t.kind}" if t.kind else ""
        out.append(f"TASK {t.id} {t.bay} {t.processing}{kind}")
    for c in inst.cranes:
        out.append(f"CRANE {c.id} {c.ready} {c.start_bay} {c.end_bay}")
    for i, j in sorted(inst.prec):
        out.append(f"PREC {i} {j}")
    implied = {tuple(sorted(pr)) for pr in inst.prec}
    for i, j in sorted(inst.nonsim):
        if inst.loc[i] != inst.loc[j] and (i, j) not in implied:
            out.append(f"NSIM {i} {j}")
    return "\n".join(out) + "\n"


def read_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# --- routing / schedule blocks ----------------------------------------------


def format_routing(routing: Routing) -> str:
    lines = []
    for k, (seq, cost) in enumerate(zip(routing.sequences, routing.route_cost), 1):
        tasks = " ".join(map(str, seq))
        lines.append(f"{k}: {tasks} | {cost}" if tasks else f"{k}: | {cost}")
    lines.append(f"eta: {routing.eta}")
    return "\n".join(lines)


def format_schedule(inst: Instance, routing: Routing, schedule: Schedule) -> str:
    crane_of = routing.crane_of()
    lines = []
    for i in range(1, inst.n + 1):
        d = schedule.completion[i]
        lines.append(f"{i}: crane {crane_of.get(i, 0)}, start {d - inst.p[i]}, completion {d}")
    for k in sorted(schedule.crane_completion):
        lines.append(f"{k}: {schedule.crane_completion[k]}")
    lines.append(f"W: {schedule.makespan}")
    return "\n".join(lines)


_TASK_RE = re.compile(r"^(\d+):\s*crane\s+(\d+),\s*start\s+(-?\d+),\s*completion\s+(-?\d+)$")
_CRANE_RE = re.compile(r"^(\d+):\s*(-?\d+)$")
_ROUTE_RE = re.compile(r"^(\d+):\s*([\d\s]*)\|\s*(-?\d+)$")


def parse_solution(text: str) -> tuple[Routing, Schedule]:
    """Read the routing and schedule blocks of a solve report.

    The routing block is optional; without it each crane's sequence is
    recovered from the start times of its tasks.
    """
    section = None
    routes: dict[int, list[int]] = {}
    costs: dict[int, int] = {}
    eta = None
    D: dict[int, int] = {}
    start: dict[int, int] = {}
    assigned: dict[int, int] = {}
    C: dict[int, int] = {}
    W = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in ("routing:", "schedule:"):
            section = line[:-1]
            continue
        if section == "routing":
            m = _ROUTE_RE.match(line)
            if m:
                k = int(m.group(1))
                routes[k] = [int(x) for x in m.group(2).split()]
                costs[k] = int(m.group(3))
                continue
            if line.startswith("eta:"):
                eta = int(line.split(":", 1)[1])
                continue
            raise ParseError(f"bad routing line {line!r}", no, 1)
        if section is None and not (_TASK_RE.match(line) or _CRANE_RE.match(line) or line.startswith("W:")):
            # report header fields such as "status: OPTIMAL"
            continue
        if section in (None, "schedule"):
            m = _TASK_RE.match(line)
            if m:
                i, k, s, d = map(int, m.groups())
                if i in D:
                    raise ParseError(f"duplicate task {i}", no, 1)
                D[i], start[i], assigned[i] = d, s, k
                continue
            m = _CRANE_RE.match(line)
            if m:
                C[int(m.group(1))] = int(m.group(2))
                continue
            if line.startswith("W:"):
                try:
                    W = int(line.split(":", 1)[1])
                except ValueError:
                    raise ParseError("bad makespan", no, 1) from None
                continue
            raise ParseError(f"bad schedule line {line!r}", no, 1)
    if W is None or not D:
        raise ParseError("no schedule block found", 1, 1)
    q = max(C) if C else 0
    if routes:
        q = max(q, max(routes))
        sequences = [routes.get(k, []) for k in range(1, q + 1)]
        cost = [costs.get(k, 0) for k in range(1, q + 1)]
        routing = Routing(sequences, cost, eta if eta is not None else max(cost, default=0))
    else:
        sequences = [[] for _ in range(q)]
        for i in sorted(D, key=lambda i: (start[i], D[i], i)):
            k = assigned[i]
            if not 1 <= k <= q:
                raise ParseError(f"task {i} on unknown crane {k}", 1, 1)
            sequences[k - 1].append(i)
        routing = Routing(sequences, [], 0)
    return routing, Schedule(D, C, W)


# --- third-party layouts -----------------------------------------------------
#
# Benchmark distributions differ in byte layout, so the adapters read a
# tolerant "key = value" (or "key: value") layout where a value is an integer
# or a list of integers / integer pairs in (), [] or {} brackets. Keys are
# matched case-insensitively against the aliases below.

_ALIASES = {
    "n": ("n", "tasks", "number_of_tasks", "numtasks", "ntasks"),
    "q": ("q", "cranes", "number_of_cranes", "numcranes", "ncranes", "qcs"),
    "B": ("b", "bays", "number_of_bays", "nbays"),
    "p": ("p", "processing", "processing_times", "processingtime", "durations"),
    "l": ("l", "location", "locations", "task_bays", "bay_of_task"),
    "l0": ("l0", "initial_positions", "start", "start_bays", "initial_bay", "initial"),
    "lT": ("lt", "final_positions", "end", "end_bays", "final_bay", "final"),
    "r": ("r", "ready", "ready_times", "readytime"),
    "prec": ("phi", "prec", "precedences", "precedence"),
    "nsim": ("psi", "nsim", "nonsimultaneous", "non_simultaneous", "nonsim"),
    "delta": ("delta", "safety", "safety_margin"),
    "t": ("t", "travel", "travel_time", "traveltime"),
}
_KEYS = {alias: key for key, aliases in _ALIASES.items() for alias in aliases}


def _parse_value(text: str, no: int):
    nums = [int(x) for x in re.findall(r"-?\d+", text)]
    if re.search(r"[\(\[\{].*[\(\[\{]", text):
        if len(nums) % 2:
            raise ParseError("odd number of entries in pair list", no, 1)
        return [tuple(nums[i : i + 2]) for i in range(0, len(nums), 2)]
    if re.search(r"[\(\[\{]", text) or len(nums) != 1:
        return nums
    return nums[0]


def _read_keyed(text: str) -> dict:
    data: dict = {}
    pending = None
    buf = ""
    start = 0
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split("//", 1)[0].strip()
        if not line:
            continue
        if pending is None:
            m = re.match(r"^([A-Za-z_][\w ]*?)\s*[:=]\s*(.*?);?$", line)
            if not m:
                raise ParseError(f"unrecognized layout: {line!r}", no, 1)
            name = m.group(1).strip().lower().replace(" ", "_")
            if name not in _KEYS:
                raise ParseError(f"unknown field {m.group(1)!r}", no, 1)
            pending, buf, start = _KEYS[name], m.group(2), no
        else:
            buf += " " + line.rstrip(";")
        if buf.count("(") + buf.count("[") + buf.count("{") == buf.count(")") + buf.count("]") + buf.count("}"):
            data[pending] = _parse_value(buf, start)
            pending = None
    if pending is not None:
        raise ParseError(f"unterminated value for {pending}", start, 1)
    return data


def convert(text: str, source: str) -> Instance:
    """Map a benchmark file into an :class:`Instance`.

    ``source`` is ``canonical``, ``kim`` (Kim-Park suite: ready times 0,
    unit travel time and a safety margin of one bay unless given) or
    ``meisel`` (Bierwirth-Meisel set A: ten bays unless given).
    """
    if source == "canonical":
        return parse_instance(text)
    if source not in ("kim", "meisel"):
        raise ParseError(f"unknown layout {source!r}", 1, 1)
    data = _read_keyed(text)
    for key in ("p", "l", "q"):
        if key not in data:
            raise ParseError(f"missing field {key!r}", 1, 1)
    p = list(data["p"]) if isinstance(data["p"], list) else [data["p"]]
    loc = list(data["l"]) if isinstance(data["l"], list) else [data["l"]]
    n = data.get("n", len(p))
    if len(p) != n or len(loc) != n:
        raise ParseError(f"expected {n} processing times and locations", 1, 1)
    q = data["q"]
    B = data.get("B", 10 if source == "meisel" else max(loc, default=1))
    r = data.get("r", [0] * q)
    r = [r] * q if isinstance(r, int) else r
    l0 = data.get("l0")
    if l0 is None:
        raise ParseError("missing initial crane positions", 1, 1)
    l0 = [l0] if isinstance(l0, int) else l0
    lT = data.get("lT", [0] * q)
    lT = [lT] * q if isinstance(lT, int) else lT
    if not (len(r) == len(l0) == len(lT) == q):
        raise ParseError(f"expected {q} crane entries", 1, 1)
    prec = data.get("prec", [])
    nsim = data.get("nsim", [])
    prec = [tuple(x) for x in prec] if isinstance(prec, list) else []
    nsim = [tuple(x) for x in nsim] if isinstance(nsim, list) else []
    try:
        return make_instance(
            [Task(i + 1, loc[i], p[i]) for i in range(n)],
            [Crane(k + 1, r[k], l0[k], lT[k]) for k in range(q)],
            B,
            data.get("delta", 1),
            data.get("t", 1),
            prec,
            nsim,
        )
    except InstanceError as exc:
        raise ParseError(str(exc), 1, 1) from None
