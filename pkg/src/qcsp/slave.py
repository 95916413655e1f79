"""Scheduling sub-problem: given crane routes, choose the order of every
conflicting cross-crane task pair so that the makespan is minimal.

Completion times are longest paths in a disjunctive graph. Per crane ``k``
there is a source node (time 0) and a sink node whose distance is the crane
completion time ``C_k``.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .model import SINK, SOURCE, Instance, InstanceError, Routing, Schedule, delta, travel


@dataclass
class DisjunctiveGraph:
    """Nodes ``1..n`` are tasks, ``n+k`` the source and ``n+q+k`` the sink
    of crane ``k``. Each disjunction ``(i, j, w_ij, w_ji)`` needs exactly one
    of the arcs ``i -> j`` (weight ``w_ij``) or ``j -> i`` (weight ``w_ji``)."""

    n: int
    q: int
    fixed_arcs: list[tuple[int, int, int]]
    disjunctions: list[tuple[int, int, int, int]]
    crane_of: dict[int, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.n + 2 * self.q + 1

    def source(self, k: int) -> int:
        return self.n + k

    def sink(self, k: int) -> int:
        return self.n + self.q + k


@dataclass
class SlaveSolution:
    completion: dict[int, int]
    crane_completion: dict[int, int]
    makespan: int
    orientation: list[int]
    nodes: int = 0
    optimal: bool = True

    @property
    def W(self) -> int:
        return self.makespan

    def schedule(self) -> Schedule:
        return Schedule(dict(self.completion), dict(self.crane_completion), self.makespan)


def _order_pairs(routing: Routing):
    for seq in routing.sequences:
        for a, b in itertools.combinations(seq, 2):
            yield a, b


def fix_z_from_routing(inst: Instance, routing: Routing) -> tuple[dict[tuple[int, int], int], list[tuple[int, int]]]:
    """Fixed order variables implied by a routing, and the free pairs.

    Returns ``(z, free)`` where ``z[(i, j)]`` is 1 if ``i`` must complete
    before ``j`` starts (and 0 for the reverse pair), and ``free`` lists the
    cross-crane conflicting pairs ``(i, j)``, ``i < j``, left to the search.
    """
    crane_of = routing.crane_of()
    z: dict[tuple[int, int], int] = {}
    for a, b in _order_pairs(routing):
        z[(a, b)], z[(b, a)] = 1, 0
    for a, b in inst.prec_closure:
        if crane_of.get(a) != crane_of.get(b):
            z[(a, b)], z[(b, a)] = 1, 0
    free = []
    for i, j in itertools.combinations(range(1, inst.n + 1), 2):
        v, w = crane_of.get(i), crane_of.get(j)
        if v == w or (i, j) in z:
            continue
        if (i, j) in inst.nonsim or delta(inst, i, j, v, w) > 0:
            free.append((i, j))
    return z, free


def build_graph(inst: Instance, routing: Routing) -> DisjunctiveGraph:
    """Disjunctive graph of a routing. Raises :class:`InstanceError` if the
    routing is not a precedence-feasible assignment of every task."""
    from .master import precedence_feasible

    n, q = inst.n, inst.q
    crane_of = routing.crane_of()
    if len(routing.sequences) != q or sorted(crane_of) != list(range(1, n + 1)) or sum(map(len, routing.sequences)) != n:
        raise InstanceError("routing must assign every task to exactly one crane")
    ok, _ = precedence_feasible(inst, routing)
    if not ok:
        raise InstanceError("routing violates precedence relations")
    p = inst.p
    arcs = []
    for k, seq in enumerate(routing.sequences, 1):
        src, snk = n + k, n + q + k
        if not seq:
            arcs.append((src, snk, travel(inst, SOURCE, SINK, k)))
            continue
        arcs.append((src, seq[0], inst.crane(k).ready + travel(inst, SOURCE, seq[0], k) + p[seq[0]]))
        for a, b in zip(seq, seq[1:]):
            arcs.append((a, b, travel(inst, a, b, k) + p[b]))
        arcs.append((seq[-1], snk, travel(inst, seq[-1], SINK, k)))
    for a, b in sorted(inst.prec_closure):
        v, w = crane_of[a], crane_of[b]
        if v != w:
            arcs.append((a, b, p[b] + delta(inst, a, b, v, w)))
    _, free = fix_z_from_routing(inst, routing)
    disj = []
    for i, j in free:
        gap = delta(inst, i, j, crane_of[i], crane_of[j])
        disj.append((i, j, p[j] + gap, p[i] + gap))
    return DisjunctiveGraph(n, q, arcs, disj, crane_of)


def _arcs_for(graph: DisjunctiveGraph, orientation):
    arcs = list(graph.fixed_arcs)
    for d, o in enumerate(orientation):
        if o is None:
            continue
        i, j, wij, wji = graph.disjunctions[d]
        arcs.append((i, j, wij) if o == 0 else (j, i, wji))
    return arcs


def _longest(size, arcs):
    """Longest distances from time zero over an arc list; None on a cycle.
    Also returns the predecessor of each node on a longest path."""
    out = [[] for _ in range(size)]
    indeg = [0] * size
    for u, v, w in arcs:
        out[u].append((v, w))
        indeg[v] += 1
    dist = [0] * size
    pred = [-1] * size
    stack = [u for u in range(1, size) if indeg[u] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        du = dist[u]
        for v, w in out[u]:
            if du + w > dist[v] or (pred[v] == -1 and du + w >= dist[v]):
                dist[v] = du + w
                pred[v] = u
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    if seen < size - 1:
        return None, None
    return dist, pred


def longest_paths(graph: DisjunctiveGraph, orientation=None):
    """Earliest completion times under the fixed arcs and the oriented
    disjunctions (``orientation[d]`` is 0 for ``i -> j``, 1 for ``j -> i``,
    None when unoriented).

    Returns ``(D, C, W)`` or None when the chosen arcs contain a cycle.
    """
    if orientation is None:
        orientation = [None] * len(graph.disjunctions)
    dist, _ = _longest(graph.size, _arcs_for(graph, orientation))
    if dist is None:
        return None
    return _unpack(graph, dist)


def _unpack(graph, dist):
    D = {i: dist[i] for i in range(1, graph.n + 1)}
    C = {k: dist[graph.sink(k)] for k in range(1, graph.q + 1)}
    return D, C, max(C.values())


def _violated(graph, dist, orientation):
    out = []
    for d, o in enumerate(orientation):
        if o is not None:
            continue
        i, j, wij, wji = graph.disjunctions[d]
        if not (dist[j] >= dist[i] + wij or dist[i] >= dist[j] + wji):
            out.append(d)
    return out


def _critical(graph, dist, pred):
    k = max(range(1, graph.q + 1), key=lambda k: (dist[graph.sink(k)], -k))
    node = graph.sink(k)
    on = set()
    while node != -1:
        on.add(node)
        node = pred[node]
    return on


def _topological_orientation(graph: DisjunctiveGraph) -> list[int]:
    order = _topo_order(graph.size, graph.fixed_arcs)
    rank = {u: r for r, u in enumerate(order)}
    return [0 if rank[i] < rank[j] else 1 for i, j, _, _ in graph.disjunctions]


def _topo_order(size, arcs):
    out = [[] for _ in range(size)]
    indeg = [0] * size
    for u, v, _ in arcs:
        out[u].append(v)
        indeg[v] += 1
    heap = [u for u in range(1, size) if indeg[u] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in out[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    return order


def solve_slave(graph: DisjunctiveGraph, ub: int | None = None) -> SlaveSolution:
    """Minimum-makespan orientation by branch-and-bound on the disjunctions.

    A node whose earliest-time schedule already satisfies every open
    disjunction is solved. Otherwise the search branches on a violated
    disjunction, preferring one whose endpoints lie on a critical path.
    ``ub`` only prunes: when no schedule below ``ub`` exists the best found
    is returned with ``optimal=False`` if it might not be minimal.
    """
    m = len(graph.disjunctions)
    start = _topological_orientation(graph)
    dist, _ = _longest(graph.size, _arcs_for(graph, start))
    if dist is None:
        raise InstanceError("fixed arcs contain a cycle")
    best = {"W": _unpack(graph, dist)[2], "dist": dist, "orient": start}
    limit = best["W"] if ub is None else min(best["W"], ub)
    state = {"nodes": 0, "limit": limit}

    def search(orient):
        state["nodes"] += 1
        dist, pred = _longest(graph.size, _arcs_for(graph, orient))
        if dist is None:
            return
        W = max(dist[graph.sink(k)] for k in range(1, graph.q + 1))
        if W >= state["limit"]:
            return
        bad = _violated(graph, dist, orient)
        if not bad:
            full = list(orient)
            for d in range(m):
                if full[d] is None:
                    i, j, wij, _ = graph.disjunctions[d]
                    full[d] = 0 if dist[j] >= dist[i] + wij else 1
            best.update(W=W, dist=dist, orient=full)
            state["limit"] = W
            return
        crit = _critical(graph, dist, pred)

        def rank(d):
            i, j = graph.disjunctions[d][:2]
            return (-((i in crit) + (j in crit)), i, j)

        d = min(bad, key=rank)
        i, j, _, _ = graph.disjunctions[d]
        first = 0 if dist[i] <= dist[j] else 1
        for o in (first, 1 - first):
            orient[d] = o
            search(orient)
            orient[d] = None

    search([None] * m)
    D, C, W = _unpack(graph, best["dist"])
    optimal = ub is None or W < ub
    return SlaveSolution(D, C, W, best["orient"], state["nodes"], optimal)


def schedule_routing(inst: Instance, routing: Routing, ub: int | None = None) -> SlaveSolution:
    return solve_slave(build_graph(inst, routing), ub)
