"""Exhaustive reference solver, random instance generator and a time-slot
schedule checker. Nothing here reuses the routing or scheduling search code,
so the decomposition can be checked against it."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .model import (
    KINDS,
    SINK,
    SOURCE,
    Crane,
    Instance,
    InstanceError,
    Routing,
    Schedule,
    Task,
    crane_limits,
    delta,
    derive_precedences,
    make_instance,
    make_routing,
    travel,
)


class OracleLimitError(RuntimeError):
    pass


@dataclass
class OracleResult:
    makespan: int
    routing: Routing
    schedule: Schedule
    routings_checked: int = 0


def _closure(n, prec):
    reach = [[False] * (n + 1) for _ in range(n + 1)]
    for i, j in prec:
        reach[i][j] = True
    for m in range(1, n + 1):
        for i in range(1, n + 1):
            if reach[i][m]:
                row_i, row_m = reach[i], reach[m]
                for j in range(1, n + 1):
                    if row_m[j]:
                        row_i[j] = True
    return reach


def _acyclic(n, sequences, prec) -> bool:
    indeg = [0] * (n + 1)
    out = [[] for _ in range(n + 1)]
    arcs = list(prec)
    for seq in sequences:
        arcs.extend(zip(seq, seq[1:]))
    for a, b in arcs:
        out[a].append(b)
        indeg[b] += 1
    ready = [i for i in range(1, n + 1) if indeg[i] == 0]
    done = 0
    while ready:
        a = ready.pop()
        done += 1
        for b in out[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return done == n


def _earliest(n, lower, cons, best):
    """Least solution of ``D[b] >= D[a] + w`` by repeated relaxation.
    None when infeasible or when some value reaches ``best``."""
    D = list(lower)
    for _ in range(n + 1):
        changed = False
        for a, b, w in cons:
            if D[a] + w > D[b]:
                D[b] = D[a] + w
                changed = True
                if D[b] >= best:
                    return None
        if not changed:
            return D
    return None


def _best_schedule(inst, sequences, best):
    """Minimum makespan of a fixed routing by depth-first enumeration of the
    order of every conflicting cross-crane pair, or None if not below best."""
    n = inst.n
    p = inst.p
    crane_of = {i: k for k, seq in enumerate(sequences, 1) for i in seq}
    lower = [0] * (n + 1)
    cons = []
    exits = []
    for k, seq in enumerate(sequences, 1):
        if not seq:
            exits.append((None, travel(inst, SOURCE, SINK, k)))
            continue
        lower[seq[0]] = inst.crane(k).ready + travel(inst, SOURCE, seq[0], k) + p[seq[0]]
        for a, b in zip(seq, seq[1:]):
            cons.append((a, b, travel(inst, a, b, k) + p[b]))
        exits.append((seq[-1], travel(inst, seq[-1], SINK, k)))
    for i, j in inst.prec:
        cons.append((i, j, p[j]))
    pairs = []
    for i, j in itertools.combinations(range(1, n + 1), 2):
        v, w = crane_of[i], crane_of[j]
        if v == w:
            continue
        gap = delta(inst, i, j, v, w)
        if gap > 0 or (i, j) in inst.nonsim:
            pairs.append((i, j, gap))

    def makespan(D):
        return max(travel_w if a is None else D[a] + travel_w for a, travel_w in exits)

    found = {"W": best, "D": None}

    def rec(t, cons):
        D = _earliest(n, lower, cons, found["W"])
        if D is None or makespan(D) >= found["W"]:
            return
        if t == len(pairs):
            found["W"], found["D"] = makespan(D), D
            return
        i, j, gap = pairs[t]
        rec(t + 1, cons + [(i, j, p[j] + gap)])
        rec(t + 1, cons + [(j, i, p[i] + gap)])

    rec(0, cons)
    if found["D"] is None:
        return None
    D = found["D"]
    C = {k: (w if a is None else D[a] + w) for k, (a, w) in enumerate(exits, 1)}
    return Schedule({i: D[i] for i in range(1, n + 1)}, C, found["W"])


def _route_cost(inst, k, seq):
    if not seq:
        return travel(inst, SOURCE, SINK, k)
    cost = inst.crane(k).ready + travel(inst, SOURCE, seq[0], k) + inst.p[seq[0]]
    for a, b in zip(seq, seq[1:]):
        cost += travel(inst, a, b, k) + inst.p[b]
    return cost + travel(inst, seq[-1], SINK, k)


def all_routings(inst: Instance, limits: bool = True):
    """Yield ``(eta, sequences)`` for every assignment of tasks to admissible
    cranes and every per-crane order consistent with the precedences."""
    n, q = inst.n, inst.q
    reach = _closure(n, inst.prec)
    allowed = []
    for i in range(1, n + 1):
        ks = []
        for k in range(1, q + 1):
            if limits:
                lo, hi = crane_limits(inst, k)
                if not lo <= inst.loc[i] <= hi:
                    continue
            ks.append(k)
        allowed.append(ks)
    cache = {}

    def orders(k, tasks):
        key = (k, tasks)
        if key not in cache:
            res = []
            for perm in itertools.permutations(tasks):
                if any(reach[perm[b]][perm[a]] for a in range(len(perm)) for b in range(a + 1, len(perm))):
                    continue
                res.append((_route_cost(inst, k, perm), perm))
            cache[key] = res
        return cache[key]

    for assign in itertools.product(*allowed):
        groups = [tuple(i + 1 for i in range(n) if assign[i] == k) for k in range(1, q + 1)]
        options = [orders(k, groups[k - 1]) for k in range(1, q + 1)]
        for combo in itertools.product(*options):
            yield max(c for c, _ in combo), [list(perm) for _, perm in combo]


def brute_force(inst: Instance, limits: bool = True, cap: int = 8) -> OracleResult:
    """Exact optimum by enumerating every routing and every cross-crane
    order. Refuses instances with more than ``cap`` tasks."""
    if inst.n > cap:
        raise OracleLimitError(f"{inst.n} tasks exceed the oracle cap of {cap}")
    candidates = sorted(all_routings(inst, limits), key=lambda r: (r[0], r[1]))
    best_W = float("inf")
    best = None
    checked = 0
    for eta, seqs in candidates:
        if eta >= best_W:
            break
        if not _acyclic(inst.n, seqs, inst.prec):
            continue
        checked += 1
        sched = _best_schedule(inst, seqs, best_W)
        if sched is not None and sched.makespan < best_W:
            best_W, best = sched.makespan, (seqs, sched)
    if best is None:
        raise InstanceError("instance has no feasible schedule")
    seqs, sched = best
    return OracleResult(best_W, make_routing(inst, seqs), sched, checked)


def schedule_ok(inst: Instance, routing: Routing, schedule: Schedule, limits: bool = True) -> bool:
    """Feasibility by time-slot occupancy: every task occupies the unit slots
    between its start and completion and reserves the interference gap after
    it; two conflicting tasks may not share a slot."""
    n, q = inst.n, inst.q
    D = schedule.completion
    where = {}
    for k, seq in enumerate(routing.sequences, 1):
        for i in seq:
            if i in where:
                return False
            where[i] = k
    if len(where) != n:
        return False
    for k, seq in enumerate(routing.sequences, 1):
        if limits:
            lo, hi = crane_limits(inst, k)
            if any(not lo <= inst.loc[i] <= hi for i in seq):
                return False
        clock = inst.crane(k).ready
        pos = None
        for i in seq:
            clock += travel(inst, pos, i, k) + inst.p[i]
            if D[i] < clock:
                return False
            clock = D[i]
            pos = i
        finish = clock + travel(inst, pos, SINK, k) if seq else travel(inst, SOURCE, SINK, k)
        if schedule.crane_completion[k] < finish:
            return False
    if schedule.makespan != max(schedule.crane_completion[k] for k in range(1, q + 1)):
        return False
    slots = {i: range(D[i] - inst.p[i], D[i]) for i in range(1, n + 1)}
    for i, j in inst.prec:
        if slots[j].start < D[i]:
            return False
    for i, j in itertools.combinations(range(1, n + 1), 2):
        gap = 0
        if where[i] != where[j]:
            gap = delta(inst, i, j, where[i], where[j])
        if gap == 0 and (i, j) not in inst.nonsim:
            continue
        a = set(range(slots[i].start, D[i] + gap))
        b = set(range(slots[j].start, D[j] + gap))
        if a & b:
            return False
    return True


# --- generator -------------------------------------------------------------


@dataclass
class GenParams:
    n: int = 6
    q: int = 2
    bays: int = 8
    safety: int = 1
    travel_unit: int = 1
    tasks_per_bay: float = 1.5
    prec_density: float = 1.0
    nsim_density: float = 0.0
    processing: tuple[int, int] = (1, 20)
    ready: tuple[int, int] = (0, 0)
    free_end: float = 1.0
    seed: int = 0


def generate(params: GenParams) -> Instance:
    """Random instance, deterministic in ``params.seed``.

    Tasks get random operation kinds; precedences follow the within-bay
    loading rules and are kept with probability ``prec_density``. Extra
    non-simultaneity pairs join tasks in adjacent bays with probability
    ``nsim_density``.
    """
    P = params
    if P.n < 0 or P.q < 1 or P.bays < 1:
        raise InstanceError("need n >= 0, q >= 1, bays >= 1")
    if P.processing[0] > P.processing[1] or P.ready[0] > P.ready[1] or P.processing[0] < 0:
        raise InstanceError("empty parameter range")
    if P.tasks_per_bay <= 0:
        raise InstanceError("tasks per bay must be positive")
    rng = random.Random(P.seed)
    probe = Instance((), tuple(Crane(k, 0, 0, 0) for k in range(1, P.q + 1)), P.bays, P.safety, P.travel_unit)
    covered = set()
    for k in range(1, P.q + 1):
        lo, hi = crane_limits(probe, k)
        covered.update(range(lo, hi + 1))
    covered = sorted(covered)
    used = max(1, min(len(covered), round(P.n / P.tasks_per_bay)))
    if P.n == 0:
        used = 0
    chosen = sorted(rng.sample(covered, used))
    bays = list(chosen)
    while len(bays) < P.n:
        bays.append(rng.choice(chosen))
    rng.shuffle(bays)
    tasks = []
    for i in range(1, P.n + 1):
        tasks.append(Task(i, bays[i - 1], rng.randint(*P.processing), rng.choice(KINDS)))
    prec = [pr for pr in sorted(derive_precedences(tasks)) if P.prec_density >= 1.0 or rng.random() < P.prec_density]
    nsim = []
    for a, b in itertools.combinations(tasks, 2):
        if abs(a.bay - b.bay) == 1 and P.nsim_density > 0 and rng.random() < P.nsim_density:
            nsim.append((a.id, b.id))
    starts = sorted(rng.randint(1, P.bays) for _ in range(P.q))
    cranes = []
    for k in range(1, P.q + 1):
        end = 0 if rng.random() < P.free_end else rng.randint(1, P.bays)
        cranes.append(Crane(k, rng.randint(*P.ready), starts[k - 1], end))
    return make_instance(tasks, cranes, P.bays, P.safety, P.travel_unit, prec, nsim)
