"""Instance data, derived geometry (travel, interference gaps, crane limits)
and an independent schedule validator for the quay crane scheduling problem.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

UNLOAD_DECK = "unload-deck"
UNLOAD_HOLD = "unload-hold"
LOAD_HOLD = "load-hold"
LOAD_DECK = "load-deck"
KINDS = (UNLOAD_DECK, UNLOAD_HOLD, LOAD_HOLD, LOAD_DECK)

# route endpoints used in arc literals
SOURCE = 0
SINK = -1


class InstanceError(ValueError):
    """Raised for structurally invalid instances or malformed solver inputs."""


@dataclass(frozen=True)
class Task:
    id: int
    bay: int
    processing: int
    kind: str | None = None


@dataclass(frozen=True)
class Crane:
    id: int
    ready: int
    start_bay: int
    end_bay: int = 0


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Instance:
    """A QCSP instance.

    ``prec`` holds ordered pairs ``(i, j)`` meaning task ``i`` completes before
    ``j`` starts. ``nonsim`` holds unordered pairs stored as ``(min, max)``.
    Use :func:`make_instance` to build a closed instance; the constructor only
    checks invariants.
    """

    tasks: tuple[Task, ...]
    cranes: tuple[Crane, ...]
    bays: int
    safety: int = 1
    travel_unit: int = 1
    prec: frozenset = field(default_factory=frozenset)
    nonsim: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.bays < 1:
            raise InstanceError("at least one bay required")
        if self.safety < 0 or self.travel_unit < 0:
            raise InstanceError("safety margin and travel unit must be nonnegative")
        if not self.cranes:
            raise InstanceError("at least one crane required")
        ids = [t.id for t in self.tasks]
        if ids != list(range(1, len(ids) + 1)):
            raise InstanceError("task ids must be 1..n in order")
        for t in self.tasks:
            if not 1 <= t.bay <= self.bays:
                raise InstanceError(f"task {t.id}: bay {t.bay} outside 1..{self.bays}")
            if t.processing < 0:
                raise InstanceError(f"task {t.id}: negative processing time")
        cids = [c.id for c in self.cranes]
        if cids != list(range(1, len(cids) + 1)):
            raise InstanceError("crane ids must be 1..q in order")
        for c in self.cranes:
            if c.ready < 0:
                raise InstanceError(f"crane {c.id}: negative ready time")
            if not 0 <= c.start_bay <= self.bays or not 0 <= c.end_bay <= self.bays:
                raise InstanceError(f"crane {c.id}: position outside 0..{self.bays}")
        starts = [c.start_bay for c in self.cranes]
        if starts != sorted(starts):
            raise InstanceError("cranes must be numbered by initial position")
        n = len(self.tasks)
        for i, j in self.prec:
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise InstanceError(f"bad precedence pair ({i}, {j})")
        for i, j in self.nonsim:
            if not (1 <= i < j <= n):
                raise InstanceError(f"bad non-simultaneity pair ({i}, {j})")
        if _has_cycle(n, self.prec):
            raise InstanceError("precedence relation is cyclic")

    @property
    def n(self) -> int:
        return len(self.tasks)

    @property
    def q(self) -> int:
        return len(self.cranes)

    def task(self, i: int) -> Task:
        return self.tasks[i - 1]

    def crane(self, k: int) -> Crane:
        return self.cranes[k - 1]

    @cached_property
    def p(self) -> list[int]:
        """Processing times indexed by task id (index 0 unused)."""
        return [0] + [t.processing for t in self.tasks]

    @cached_property
    def loc(self) -> list[int]:
        return [0] + [t.bay for t in self.tasks]

    @cached_property
    def succ(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {i: set() for i in range(1, self.n + 1)}
        for i, j in self.prec:
            out[i].add(j)
        return out

    @cached_property
    def prec_closure(self) -> frozenset:
        """Transitive closure of the precedence relation."""
        closure = set()
        for i in range(1, self.n + 1):
            stack = list(self.succ[i])
            seen = set()
            while stack:
                j = stack.pop()
                if j in seen:
                    continue
                seen.add(j)
                closure.add((i, j))
                stack.extend(self.succ[j])
        return frozenset(closure)

    def is_closed(self) -> bool:
        return close_nonsim(self).nonsim == self.nonsim


def _has_cycle(n: int, arcs) -> bool:
    indeg = [0] * (n + 1)
    out: dict[int, list[int]] = {}
    for i, j in arcs:
        out.setdefault(i, []).append(j)
        indeg[j] += 1
    stack = [i for i in range(1, n + 1) if indeg[i] == 0]
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for j in out.get(i, ()):
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    return seen < n


def derive_precedences(tasks) -> set[tuple[int, int]]:
    """Precedence pairs implied by the operation kinds of tasks sharing a bay.

    Unloading precedes loading, deck unloading precedes hold unloading and
    hold loading precedes deck loading. Only direct rule applications are
    returned; the transitive closure is not added.
    """
    rank = {UNLOAD_DECK: 0, UNLOAD_HOLD: 1, LOAD_HOLD: 2, LOAD_DECK: 3}
    for t in tasks:
        if t.kind is None:
            raise InstanceError("kinds required for derivation")
        if t.kind not in rank:
            raise InstanceError(f"unknown task kind {t.kind!r}")
    pairs = set()
    for a, b in itertools.permutations(tasks, 2):
        if a.bay == b.bay and rank[a.kind] < rank[b.kind]:
            pairs.add((a.id, b.id))
    return pairs


def close_nonsim(inst: Instance) -> Instance:
    """Return ``inst`` with same-bay pairs and precedence pairs added to the
    non-simultaneity set."""
    pairs = set(inst.nonsim)
    pairs.update(_pair(i, j) for i, j in inst.prec)
    for a, b in itertools.combinations(inst.tasks, 2):
        if a.bay == b.bay:
            pairs.add(_pair(a.id, b.id))
    if pairs == set(inst.nonsim):
        return inst
    return replace(inst, nonsim=frozenset(pairs))


def make_instance(tasks, cranes, bays, safety=1, travel_unit=1, prec=(), nonsim=()) -> Instance:
    """Build a closed :class:`Instance` from plain sequences."""
    tasks = tuple(t if isinstance(t, Task) else Task(*t) for t in tasks)
    cranes = tuple(c if isinstance(c, Crane) else Crane(*c) for c in cranes)
    inst = Instance(
        tasks=tasks,
        cranes=cranes,
        bays=bays,
        safety=safety,
        travel_unit=travel_unit,
        prec=frozenset((int(i), int(j)) for i, j in prec),
        nonsim=frozenset(_pair(int(i), int(j)) for i, j in nonsim),
    )
    return close_nonsim(inst)


def travel(inst: Instance, i: int | None, j: int | None, k: int) -> int:
    """Travel time between two route nodes of crane ``k``.

    ``None`` (or ``SOURCE``/``SINK``) denotes the crane's initial position
    when used as ``i`` and its final position when used as ``j``. A free final
    position (``end_bay == 0``) costs nothing to reach.
    """
    crane = inst.crane(k)
    if i in (None, SOURCE):
        a = crane.start_bay
    else:
        a = inst.loc[i]
    if j in (None, SINK):
        if crane.end_bay == 0:
            return 0
        b = crane.end_bay
    else:
        b = inst.loc[j]
    return inst.travel_unit * abs(a - b)


def delta(inst: Instance, i: int, j: int, v: int, w: int) -> int:
    """Minimum idle time between the processing of task ``i`` on crane ``v``
    and task ``j`` on crane ``w`` so that neither crossing nor a safety margin
    violation occurs.

    Cranes ``v < w`` must keep ``(w - v) * (safety + 1)`` bays between them;
    the gap is the time needed to travel the missing distance.
    """
    if v == w:
        raise InstanceError("interference gap is undefined for a single crane")
    li, lj = inst.loc[i], inst.loc[j]
    sep = abs(w - v) * (inst.safety + 1)
    if v < w:
        return inst.travel_unit * max(0, li + sep - lj)
    return inst.travel_unit * max(0, lj + sep - li)


def crane_limits(inst: Instance, k: int) -> tuple[int, int]:
    """Leftmost and rightmost bay crane ``k`` may work on."""
    if not 1 <= k <= inst.q:
        raise InstanceError(f"no crane {k}")
    lo = (k - 1) * (inst.safety + 1) + 1
    hi = inst.bays - (inst.q - k) * (1 + inst.safety)
    if lo > hi:
        raise InstanceError(f"crane {k} has empty operating range")
    return lo, hi


def admissible_cranes(inst: Instance, i: int, limits: bool = True) -> list[int]:
    if not limits:
        return list(range(1, inst.q + 1))
    out = []
    for k in range(1, inst.q + 1):
        lo, hi = crane_limits(inst, k)
        if lo <= inst.loc[i] <= hi:
            out.append(k)
    return out


def theta(inst: Instance) -> set[tuple[int, int, int, int]]:
    """All ``(i, j, v, w)`` with ``i < j``, ``v != w`` and a positive gap."""
    out = set()
    for i, j in itertools.combinations(range(1, inst.n + 1), 2):
        for v, w in itertools.permutations(range(1, inst.q + 1), 2):
            if delta(inst, i, j, v, w) > 0:
                out.add((i, j, v, w))
    return out


# --- solutions -----------------------------------------------------------


@dataclass
class Routing:
    """One ordered task list per crane, with route costs and their maximum."""

    sequences: list[list[int]]
    route_cost: list[int] = field(default_factory=list)
    eta: int = 0

    def crane_of(self) -> dict[int, int]:
        return {i: k for k, seq in enumerate(self.sequences, 1) for i in seq}

    def arcs(self) -> set[tuple[int, int, int]]:
        """Arc literals ``(crane, from, to)`` including depot arcs."""
        out = set()
        for k, seq in enumerate(self.sequences, 1):
            nodes = [SOURCE, *seq, SINK]
            for u, v in zip(nodes, nodes[1:]):
                out.add((k, u, v))
        return out

    def assignments(self) -> set[tuple[int, int]]:
        return {(i, k) for k, seq in enumerate(self.sequences, 1) for i in seq}


def route_costs(inst: Instance, sequences) -> list[int]:
    """Cost of each crane route: ready time, travel and processing along the
    route, and the final move to the end position."""
    costs = []
    for k, seq in enumerate(sequences, 1):
        if not seq:
            costs.append(travel(inst, SOURCE, SINK, k))
            continue
        c = inst.crane(k).ready + travel(inst, SOURCE, seq[0], k) + inst.p[seq[0]]
        for a, b in zip(seq, seq[1:]):
            c += travel(inst, a, b, k) + inst.p[b]
        c += travel(inst, seq[-1], SINK, k)
        costs.append(c)
    return costs


def make_routing(inst: Instance, sequences) -> Routing:
    seqs = [list(s) for s in sequences]
    costs = route_costs(inst, seqs)
    return Routing(seqs, costs, max(costs) if costs else 0)


@dataclass
class Schedule:
    """Completion times per task and crane, and the makespan."""

    completion: dict[int, int]
    crane_completion: dict[int, int]
    makespan: int

    def start(self, inst: Instance, i: int) -> int:
        return self.completion[i] - inst.p[i]


class Code(enum.Enum):
    UNASSIGNED_TASK = "UNASSIGNED_TASK"
    DOUBLE_ASSIGNMENT = "DOUBLE_ASSIGNMENT"
    PRECEDENCE = "PRECEDENCE"
    NONSIM_OVERLAP = "NONSIM_OVERLAP"
    INTERFERENCE_GAP = "INTERFERENCE_GAP"
    CRANE_LIMIT = "CRANE_LIMIT"
    COMPLETION_ARITHMETIC = "COMPLETION_ARITHMETIC"
    READY_TIME = "READY_TIME"
    MAKESPAN_MISMATCH = "MAKESPAN_MISMATCH"


@dataclass(frozen=True)
class Violation:
    code: Code
    detail: str

    def __str__(self):
        return f"{self.code.value}: {self.detail}"


def validate_schedule(inst: Instance, routing: Routing, schedule: Schedule, limits: bool = True) -> list[Violation]:
    """Check a routing and its schedule against every model constraint.

    Returns an empty list iff the schedule is feasible. Raises
    :class:`InstanceError` when the inputs do not describe the instance
    (wrong crane count, unknown task ids, missing times).
    """
    n, q = inst.n, inst.q
    if len(routing.sequences) != q:
        raise InstanceError(f"routing has {len(routing.sequences)} cranes, instance has {q}")
    for seq in routing.sequences:
        for i in seq:
            if not 1 <= i <= n:
                raise InstanceError(f"unknown task {i} in routing")
    if set(schedule.completion) != set(range(1, n + 1)):
        raise InstanceError("schedule must give a completion time for every task")
    if set(schedule.crane_completion) != set(range(1, q + 1)):
        raise InstanceError("schedule must give a completion time for every crane")

    out: list[Violation] = []
    D = schedule.completion
    p = inst.p

    seen: dict[int, int] = {}
    for k, seq in enumerate(routing.sequences, 1):
        for i in seq:
            if i in seen:
                out.append(Violation(Code.DOUBLE_ASSIGNMENT, f"task {i} on cranes {seen[i]} and {k}"))
            else:
                seen[i] = k
    for i in range(1, n + 1):
        if i not in seen:
            out.append(Violation(Code.UNASSIGNED_TASK, f"task {i}"))

    for k, seq in enumerate(routing.sequences, 1):
        crane = inst.crane(k)
        if limits:
            try:
                lo, hi = crane_limits(inst, k)
            except InstanceError:
                lo, hi = 1, 0
            for i in seq:
                if not lo <= inst.loc[i] <= hi:
                    out.append(Violation(Code.CRANE_LIMIT, f"task {i} at bay {inst.loc[i]} outside [{lo}, {hi}] of crane {k}"))
        if seq:
            first = seq[0]
            if D[first] - p[first] < crane.ready:
                out.append(Violation(Code.READY_TIME, f"task {first} starts at {D[first] - p[first]} before crane {k} ready at {crane.ready}"))
            elif D[first] < crane.ready + travel(inst, SOURCE, first, k) + p[first]:
                out.append(Violation(Code.COMPLETION_ARITHMETIC, f"task {first} completes at {D[first]}, too early after crane {k} start"))
            for a, b in zip(seq, seq[1:]):
                need = D[a] + travel(inst, a, b, k) + p[b]
                if D[b] < need:
                    out.append(Violation(Code.COMPLETION_ARITHMETIC, f"task {b} completes at {D[b]} < {need} after task {a}"))
            need = D[seq[-1]] + travel(inst, seq[-1], SINK, k)
        else:
            need = travel(inst, SOURCE, SINK, k)
        if schedule.crane_completion[k] < need:
            out.append(Violation(Code.COMPLETION_ARITHMETIC, f"crane {k} completes at {schedule.crane_completion[k]} < {need}"))

    if schedule.makespan != max(schedule.crane_completion.values()):
        out.append(Violation(Code.MAKESPAN_MISMATCH, f"W={schedule.makespan}, max C_k={max(schedule.crane_completion.values())}"))

    for i, j in sorted(inst.prec):
        if D[j] - p[j] < D[i]:
            out.append(Violation(Code.PRECEDENCE, f"task {j} starts at {D[j] - p[j]} before task {i} completes at {D[i]}"))

    for i, j in sorted(inst.nonsim):
        if max(D[i] - p[i], D[j] - p[j]) < min(D[i], D[j]):
            out.append(Violation(Code.NONSIM_OVERLAP, f"tasks {i} and {j} overlap"))

    for i, j in itertools.combinations(range(1, n + 1), 2):
        v, w = seen.get(i), seen.get(j)
        if v is None or w is None or v == w:
            continue
        gap = delta(inst, i, j, v, w)
        if gap <= 0:
            continue
        if not (D[j] - p[j] >= D[i] + gap or D[i] - p[i] >= D[j] + gap):
            out.append(Violation(Code.INTERFERENCE_GAP, f"tasks {i} (crane {v}) and {j} (crane {w}) need a gap of {gap}"))
    return out


def is_unidirectional(inst: Instance, routing: Routing) -> tuple[bool, list[str]]:
    """Report the travel direction of each crane.

    Directions are ``"right"``, ``"left"``, ``"none"`` (no movement between
    tasks) or ``"mixed"``. The schedule is unidirectional when no crane is
    mixed.
    """
    dirs = []
    for seq in routing.sequences:
        bays = [inst.loc[i] for i in seq]
        up = all(a <= b for a, b in zip(bays, bays[1:]))
        down = all(a >= b for a, b in zip(bays, bays[1:]))
        if up and down:
            dirs.append("none")
        elif up:
            dirs.append("right")
        elif down:
            dirs.append("left")
        else:
            dirs.append("mixed")
    return all(d != "mixed" for d in dirs), dirs


def precedence_cycle(inst: Instance, sequences) -> list[int] | None:
    """Find a cycle in the digraph of route successor arcs plus precedence
    arcs. Returns the cycle as a task list (first task not repeated) or None.
    """
    nxt: dict[int, int] = {}
    for seq in sequences:
        for a, b in zip(seq, seq[1:]):
            nxt[a] = b
    succ = inst.succ
    color = {}
    parent = {}
    for root in range(1, inst.n + 1):
        if root in color:
            continue
        stack = [(root, iter(_neighbours(root, nxt, succ)))]
        color[root] = 1
        while stack:
            u, it = stack[-1]
            for v in it:
                if color.get(v) == 1:
                    cyc = [u]
                    while cyc[-1] != v:
                        cyc.append(parent[cyc[-1]])
                    cyc.reverse()
                    return cyc
                if v not in color:
                    color[v] = 1
                    parent[v] = u
                    stack.append((v, iter(_neighbours(v, nxt, succ))))
                    break
            else:
                color[u] = 2
                stack.pop()
    return None


def _neighbours(u, nxt, succ):
    if u in nxt:
        yield nxt[u]
    yield from sorted(succ.get(u, ()))
