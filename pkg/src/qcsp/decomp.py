"""Master/slave decomposition driver and the cuts it sends back to the
routing problem."""

from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass, field

from .master import (
    CostTable,
    Cut,
    Family,
    MasterSession,
    build_costs,
    precedence_feasible,
    seed_cut_pool,
)
from .model import SINK, SOURCE, Instance, InstanceError, Routing, Schedule, admissible_cranes, crane_limits, make_routing
from .slave import SlaveSolution, build_graph, solve_slave


class Status(enum.Enum):
    OPTIMAL = "OPTIMAL"
    TIME_LIMIT = "TIME_LIMIT"
    INFEASIBLE_INPUT = "INFEASIBLE_INPUT"


@dataclass
class DriverConfig:
    time_limit: float | None = None
    master_node_limit: int | None = None
    limits: bool = True
    samebay: bool = True
    sset: bool = True
    # largest number of reorderings checked before a same-bay run is merged
    samebay_check_limit: int = 120

    def __post_init__(self):
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.master_node_limit is not None and self.master_node_limit <= 0:
            raise ValueError("node limit must be positive")


@dataclass
class TracePoint:
    iteration: int
    lb: float
    ub: float
    eta: int | None
    W: int | None


@dataclass
class SolveReport:
    status: Status
    routing: Routing | None = None
    schedule: Schedule | None = None
    lb: float = 0
    ub: float = math.inf
    iterations: int = 0
    cuts_added: dict = field(default_factory=lambda: {f: 0 for f in Family})
    master_nodes: int = 0
    slave_nodes: int = 0
    wall_time: float = 0.0
    trace: list[TracePoint] = field(default_factory=list)
    emitted: list[tuple[Routing, list[Cut]]] = field(default_factory=list)
    message: str = ""

    @property
    def W(self):
        return self.schedule.makespan if self.schedule else None


def check_input(inst: Instance, limits: bool = True) -> str | None:
    """Reason why ``inst`` cannot be solved, or None."""
    if limits:
        for k in range(1, inst.q + 1):
            try:
                crane_limits(inst, k)
            except InstanceError as exc:
                return str(exc)
        for i in range(1, inst.n + 1):
            if not admissible_cranes(inst, i, limits):
                return f"task {i} at bay {inst.loc[i]} is outside every crane range"
    return None


# --- cut generation --------------------------------------------------------


def _inner(k, S):
    """Arc literals of crane k with both ends in S (no arc enters the
    source or leaves the sink)."""
    return {(k, u, v) for u in S for v in S if u != v and v != SOURCE and u != SINK}


def sset_cuts(inst: Instance, routing: Routing, ub: int, costs: CostTable | None = None) -> list[Cut]:
    """Cuts for precedence pairs split across cranes whose surrounding work
    cannot fit below ``ub``."""
    crane_of = routing.crane_of()
    p = inst.p
    out = []
    for i, j in sorted(inst.prec):
        ki, kj = crane_of[i], crane_of[j]
        if ki == kj:
            continue
        seq_i, seq_j = routing.sequences[ki - 1], routing.sequences[kj - 1]
        before = seq_i[: seq_i.index(i)]
        after = seq_j[seq_j.index(j) + 1 :]
        work = sum(p[u] for u in before) + p[i] + p[j] + sum(p[u] for u in after)
        hit = work > ub
        if not hit and not before and not after and costs is not None:
            hit = costs.c0[ki][i] + p[j] + costs.cT[j][kj] > ub
        if not hit:
            continue
        Si = {SOURCE, *before}
        Sj = {*after, SINK}
        arcs = _inner(ki, Si) | {(ki, u, i) for u in Si} | {(kj, j, v) for v in Sj} | _inner(kj, Sj)
        out.append(Cut(frozenset(arcs), frozenset(), len(Si) + len(Sj) - 1, Family.SSET))
    return out


def samebay_runs(inst: Instance, seq: list[int]) -> list[tuple[int, int]]:
    """Maximal runs ``seq[a:b]`` (length >= 2) of consecutive tasks in one bay
    with no precedence between run members."""
    runs = []
    a = 0
    closure = inst.prec_closure
    while a < len(seq):
        b = a + 1
        while (
            b < len(seq)
            and inst.loc[seq[b]] == inst.loc[seq[a]]
            and not any((u, seq[b]) in closure or (seq[b], u) in closure for u in seq[a:b])
        ):
            b += 1
        if b - a >= 2:
            runs.append((a, b))
        a = b
    return runs


def _reorder_ok(inst: Instance, routing: Routing, fixed: list, k: int, run: tuple[int, int], ub: int, limit: int) -> bool:
    """True if every reordering of ``run`` (combined with reorderings of the
    already accepted runs in ``fixed``) is infeasible or no better than ub."""
    groups = fixed + [(k, run)]
    total = 1
    for _, (a, b) in groups:
        total *= math.factorial(b - a)
    if total > limit:
        return False
    options = [list(itertools.permutations(routing.sequences[kk - 1][a:b])) for kk, (a, b) in groups]
    for combo in itertools.product(*options):
        seqs = [list(s) for s in routing.sequences]
        for (kk, (a, b)), perm in zip(groups, combo):
            seqs[kk - 1][a:b] = perm
        if seqs == routing.sequences:
            continue
        cand = make_routing(inst, seqs)
        if not precedence_feasible(inst, cand)[0]:
            continue
        if cand.eta >= ub:
            continue
        if solve_slave(build_graph(inst, cand), ub).makespan < ub:
            return False
    return True


def nogood_cut(inst: Instance, routing: Routing, ub: int | None = None, samebay: bool = True, check_limit: int = 120) -> Cut:
    """No-good cut excluding ``routing``; same-bay runs are widened to every
    internal order when those orders are verified to be no better than ub."""
    arcs = set(routing.arcs())
    accepted = []
    if samebay and ub is not None:
        for k, seq in enumerate(routing.sequences, 1):
            for run in samebay_runs(inst, seq):
                if _reorder_ok(inst, routing, accepted, k, run, ub, check_limit):
                    accepted.append((k, run))
    for k, (a, b) in accepted:
        seq = routing.sequences[k - 1]
        nodes = [SOURCE, *seq, SINK]
        S = set(seq[a:b])
        before, after = nodes[a], nodes[b + 1]
        for u, v in zip(nodes[a : b + 2], nodes[a + 1 : b + 2]):
            arcs.discard((k, u, v))
        arcs |= {(k, before, s) for s in S} | _inner(k, S) | {(k, s, after) for s in S}
    rhs = sum(len(s) + 1 for s in routing.sequences) - 1
    family = Family.NOGOOD_SAMEBAY if accepted else Family.NOGOOD
    return Cut(frozenset(arcs), frozenset(), rhs, family)


def generate_cuts(
    inst: Instance,
    routing: Routing,
    solution: SlaveSolution,
    ub: int,
    config: DriverConfig | None = None,
    improved: bool = False,
    costs: CostTable | None = None,
) -> list[Cut]:
    """Cuts excluding ``routing`` from later routing problems.

    S-set cuts come first; a no-good cut is used when none applies or when
    the routing just improved the incumbent.
    """
    config = config or DriverConfig()
    cuts = sset_cuts(inst, routing, ub, costs) if config.sset else []
    if improved or not cuts:
        cuts.append(nogood_cut(inst, routing, ub, config.samebay, config.samebay_check_limit))
    return cuts


# --- driver ----------------------------------------------------------------


def run(inst: Instance, config: DriverConfig | None = None) -> SolveReport:
    """Iterate routing and scheduling until the routing bound meets the best
    makespan found."""
    config = config or DriverConfig()
    t0 = time.perf_counter()
    deadline = t0 + config.time_limit if config.time_limit else None
    report = SolveReport(Status.INFEASIBLE_INPUT)
    reason = check_input(inst, config.limits)
    if reason:
        report.message = reason
        report.wall_time = time.perf_counter() - t0
        return report

    costs = build_costs(inst)
    pool = seed_cut_pool(inst)
    for c in pool:
        report.cuts_added[c.family] += 1
    lb, ub = 0, math.inf
    status = None

    def take(routing: Routing, sol: SlaveSolution):
        nonlocal ub
        if sol.makespan < ub:
            ub = sol.makespan
            report.routing, report.schedule = routing, sol.schedule()
            return True
        return False

    master = MasterSession(inst, costs, pool, config.limits, deadline)
    while status is None:
        report.iterations += 1
        it = report.iterations
        res = master.next(ub, config.master_node_limit, it)
        report.master_nodes += res.nodes
        for c in res.new_cuts:
            report.cuts_added[c.family] += 1
        lb = max(lb, min(res.lower_bound, ub))
        if res.status == "timeout":
            if res.routing is not None and res.routing.eta < ub:
                sol = solve_slave(build_graph(inst, res.routing), None if ub == math.inf else ub)
                report.slave_nodes += sol.nodes
                take(res.routing, sol)
            status = Status.OPTIMAL if lb >= ub else Status.TIME_LIMIT
            report.trace.append(TracePoint(it, lb, ub, None, None))
            break
        if res.routing is None:
            if ub == math.inf:
                report.message = "no feasible routing"
                status = Status.INFEASIBLE_INPUT
                break
            lb = ub
            report.trace.append(TracePoint(it, lb, ub, None, None))
            status = Status.OPTIMAL
            break
        routing = res.routing
        sol = solve_slave(build_graph(inst, routing), None if ub == math.inf else ub)
        report.slave_nodes += sol.nodes
        improved = take(routing, sol)
        report.trace.append(TracePoint(it, lb, ub, routing.eta, sol.makespan))
        if lb >= ub:
            status = Status.OPTIMAL
            break
        cuts = generate_cuts(inst, routing, sol, ub, config, improved, costs)
        for cut in cuts:
            cut = Cut(cut.arc_terms, cut.assign_terms, cut.rhs, cut.family, it)
            if pool.add(cut):
                report.cuts_added[cut.family] += 1
        report.emitted.append((routing, cuts))
        if deadline is not None and time.perf_counter() > deadline:
            status = Status.TIME_LIMIT
    report.status = status
    report.lb, report.ub = lb, ub
    report.wall_time = time.perf_counter() - t0
    return report


def check_cut_validity(cut: Cut, inst: Instance, ub: int, limits: bool = True) -> bool:
    """True iff no routing violating ``cut`` admits a schedule with makespan
    below ``ub``. Exhaustive; small instances only."""
    from .oracle import _acyclic, _best_schedule, all_routings

    for eta, seqs in all_routings(inst, limits):
        if eta >= ub:
            continue
        r = make_routing(inst, seqs)
        if not cut.violated_by(r):
            continue
        if not _acyclic(inst.n, seqs, inst.prec):
            continue
        if _best_schedule(inst, seqs, ub) is not None:
            return False
    return True


# --- report serialization --------------------------------------------------


def _num(x):
    return None if x == math.inf else int(x)


def report_dict(report: SolveReport, inst: Instance, timing: bool = True) -> dict:
    """Structured form of a report; key order is fixed."""
    out = {
        "status": report.status.value,
        "lb": _num(report.lb),
        "ub": _num(report.ub),
        "W": report.W,
        "iterations": report.iterations,
        "cuts": {f.value: report.cuts_added[f] for f in Family},
        "master_nodes": report.master_nodes,
        "slave_nodes": report.slave_nodes,
    }
    if timing:
        out["wall_time_ms"] = round(report.wall_time * 1000)
    if report.message:
        out["message"] = report.message
    if report.routing is not None:
        crane_of = report.routing.crane_of()
        s = report.schedule
        out["routing"] = {
            "sequences": [list(seq) for seq in report.routing.sequences],
            "route_cost": list(report.routing.route_cost),
            "eta": report.routing.eta,
        }
        out["schedule"] = {
            "tasks": [
                {"id": i, "crane": crane_of[i], "start": s.completion[i] - inst.p[i], "completion": s.completion[i]}
                for i in range(1, inst.n + 1)
            ],
            "cranes": {str(k): s.crane_completion[k] for k in sorted(s.crane_completion)},
            "W": s.makespan,
        }
    return out


def format_report(report: SolveReport, inst: Instance, timing: bool = True) -> str:
    """Text form: ``key: value`` lines, then routing and schedule blocks."""
    from .formats import format_routing, format_schedule

    def show(x):
        return "-" if x is None else str(x)

    lines = [
        f"status: {report.status.value}",
        f"lb: {show(_num(report.lb))}",
        f"ub: {show(_num(report.ub))}",
        f"W: {show(report.W)}",
        f"iterations: {report.iterations}",
    ]
    lines += [f"cuts.{f.value}: {report.cuts_added[f]}" for f in Family]
    lines += [f"master_nodes: {report.master_nodes}", f"slave_nodes: {report.slave_nodes}"]
    if timing:
        lines.append(f"wall_time_ms: {round(report.wall_time * 1000)}")
    if report.message:
        lines.append(f"message: {report.message}")
    if report.routing is not None:
        lines += ["routing:", format_routing(report.routing), "schedule:", format_schedule(inst, report.routing, report.schedule)]
    return "\n".join(lines) + "\n"
