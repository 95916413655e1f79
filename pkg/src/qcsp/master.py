"""Routing sub-problem: assign and sequence tasks per crane so that the
longest crane route is minimal, subject to a pool of combinatorial cuts.

The search is a depth-first branch-and-bound over partial routings. Every
cut has 0/1 coefficients and a "<=" sense, so a cut whose committed
left-hand side already exceeds its right-hand side prunes the node.
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass, field

from .model import SINK, SOURCE, Instance, Routing, admissible_cranes, make_routing, precedence_cycle, travel


class Family(enum.Enum):
    SEC2 = "SEC2"
    PCB = "PCB"
    LIFTED_SEC = "LIFTED_SEC"
    CROSS_PREC = "CROSS_PREC"
    NOGOOD = "NOGOOD"
    NOGOOD_SAMEBAY = "NOGOOD_SAMEBAY"
    SSET = "SSET"


@dataclass(frozen=True, eq=False)
class Cut:
    """``sum(arc literals) + sum(assignment literals) <= rhs``.

    Arc literals are ``(crane, from, to)`` with ``SOURCE``/``SINK`` for the
    depots; assignment literals are ``(task, crane)``.
    """

    arc_terms: frozenset
    assign_terms: frozenset = frozenset()
    rhs: int = 0
    family: Family = Family.NOGOOD
    origin_iteration: int = 0

    def key(self):
        return (self.arc_terms, self.assign_terms, self.rhs)

    def lhs(self, routing: Routing) -> int:
        return len(self.arc_terms & routing.arcs()) + len(self.assign_terms & routing.assignments())

    def violated_by(self, routing: Routing) -> bool:
        return self.lhs(routing) > self.rhs

    def literals(self):
        for k, u, v in self.arc_terms:
            yield ("x", k, u, v)
        for i, k in self.assign_terms:
            yield ("y", i, k)


class CutPool:
    def __init__(self):
        self.cuts: list[Cut] = []
        self.index: dict[tuple, list[int]] = {}
        self._keys: set = set()

    def __len__(self):
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def add(self, cut: Cut) -> bool:
        """Add ``cut`` unless an identical one is pooled. Returns True if added."""
        key = cut.key()
        if key in self._keys:
            return False
        self._keys.add(key)
        cid = len(self.cuts)
        self.cuts.append(cut)
        for lit in cut.literals():
            self.index.setdefault(lit, []).append(cid)
        return True

    def violated(self, routing: Routing) -> list[Cut]:
        return [c for c in self.cuts if c.violated_by(routing)]

    def counts(self) -> dict[Family, int]:
        out = {f: 0 for f in Family}
        for c in self.cuts:
            out[c.family] += 1
        return out


@dataclass
class CostTable:
    c0: list[list[int]]
    c: list[list[int]]
    cT: list[list[int]]
    empty: list[int]


def build_costs(inst: Instance) -> CostTable:
    """Arc costs of the routing problem; all tables indexed from 1."""
    n, q = inst.n, inst.q
    c0 = [[0] * (n + 1) for _ in range(q + 1)]
    c = [[0] * (n + 1) for _ in range(n + 1)]
    cT = [[0] * (q + 1) for _ in range(n + 1)]
    empty = [0] * (q + 1)
    for k in range(1, q + 1):
        r = inst.crane(k).ready
        empty[k] = travel(inst, SOURCE, SINK, k)
        for i in range(1, n + 1):
            c0[k][i] = r + travel(inst, SOURCE, i, k) + inst.p[i]
            cT[i][k] = travel(inst, i, SINK, k)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j:
                c[i][j] = travel(inst, i, j, 1) + inst.p[j]
    return CostTable(c0, c, cT, empty)


def seed_cut_pool(inst: Instance) -> CutPool:
    """Size-two subtour eliminations and precedence cycle breaking cuts."""
    pool = CutPool()
    ks = range(1, inst.q + 1)
    for i, j in itertools.combinations(range(1, inst.n + 1), 2):
        for k in ks:
            pool.add(Cut(frozenset({(k, i, j), (k, j, i)}), rhs=1, family=Family.SEC2))
    for (i1, j1), (i2, j2) in itertools.permutations(sorted(inst.prec), 2):
        if len({i1, j1, i2, j2}) < 4:
            continue
        for k in ks:
            pool.add(Cut(frozenset({(k, i1, j2), (k, j1, i2)}), rhs=1, family=Family.PCB))
    return pool


# --- precedence feasibility ------------------------------------------------


@dataclass
class Witness:
    """A precedence cycle as pairs ``(i_m, j_m)`` of the precedence relation
    joined by route segments: crane ``k_m`` runs from ``j_m`` through
    ``segment_m`` whose last task is ``i_{m+1}``."""

    pairs: list[tuple[int, int]]
    cranes: list[int]
    segments: list[list[int]]


def _witness_from_cycle(inst: Instance, sequences, cycle: list[int]) -> Witness:
    nxt = {}
    crane_of = {}
    for k, seq in enumerate(sequences, 1):
        for a in seq:
            crane_of[a] = k
        for a, b in zip(seq, seq[1:]):
            nxt[a] = b
    m = len(cycle)
    is_route = [nxt.get(cycle[t]) == cycle[(t + 1) % m] for t in range(m)]
    # rotate so the cycle starts with the first precedence arc after a route arc
    start = next(t for t in range(m) if not is_route[t] and is_route[t - 1])
    cyc = cycle[start:] + cycle[:start]
    kinds = is_route[start:] + is_route[:start]
    pairs, cranes, segments = [], [], []
    t = 0
    while t < m:
        i = cyc[t]
        while t < m and not kinds[t]:
            t += 1
        j = cyc[t % m]
        seg = []
        while t < m and kinds[t]:
            seg.append(cyc[(t + 1) % m])
            t += 1
        pairs.append((i, j))
        cranes.append(crane_of[j])
        segments.append(seg)
    return Witness(pairs, cranes, segments)


def precedence_feasible(inst: Instance, routing) -> tuple[bool, Witness | None]:
    """True iff route successor arcs plus precedence arcs form no cycle.

    On failure a witness alternating precedence pairs (transitive pairs
    allowed) and same-crane route segments is returned.
    """
    seqs = routing.sequences if isinstance(routing, Routing) else routing
    cycle = precedence_cycle(inst, seqs)
    if cycle is None:
        return True, None
    return False, _witness_from_cycle(inst, seqs, cycle)


def make_lifted_sec(i: int, j: int, k: int, S) -> Cut:
    """Lifted subtour elimination ``x^k(S) + y_ik <= |S| - 1`` for ``i``
    preceding ``j``, with the start depot and ``j`` in ``S`` and ``i`` not."""
    S = frozenset(S)
    if SOURCE not in S or j not in S or i in S:
        raise ValueError("need 0 and j in S, i outside S")
    arcs = frozenset((k, u, v) for u in S for v in S if u != v and v != SOURCE)
    return Cut(arcs, frozenset({(i, k)}), len(S) - 1, Family.LIFTED_SEC)


def make_cross_prec_cut(witness: Witness) -> Cut:
    """At least one of the route segments of a multi-crane precedence cycle
    must change."""
    if len(witness.pairs) < 2:
        raise ValueError("single-pair witnesses are covered by lifted SECs")
    arcs = set()
    size = 0
    seen = set()
    for (_, j), k, seg in zip(witness.pairs, witness.cranes, witness.segments):
        if not seg:
            raise ValueError("empty route segment in witness")
        if seen & ({j} | set(seg)):
            raise ValueError("witness tasks must be distinct")
        seen |= {j} | set(seg)
        arcs.update((k, j, s) for s in seg)
        arcs.update((k, u, v) for u in seg for v in seg if u != v)
        size += len(seg)
    return Cut(frozenset(arcs), frozenset(), size - 1, Family.CROSS_PREC)


def cut_from_witness(witness: Witness, sequences) -> Cut:
    if len(witness.pairs) == 1:
        (i, j), k = witness.pairs[0], witness.cranes[0]
        seq = sequences[k - 1]
        prefix = seq[: seq.index(j) + 1]
        return make_lifted_sec(i, j, k, {SOURCE, *prefix})
    return make_cross_prec_cut(witness)


# --- search ----------------------------------------------------------------


@dataclass
class MasterResult:
    """``status`` is ``optimal`` (routing is a minimum), ``bound`` (no
    routing cheaper than ``ub`` exists) or ``timeout``."""

    status: str
    routing: Routing | None
    lower_bound: float
    nodes: int = 0
    new_cuts: list[Cut] = field(default_factory=list)


class _Timeout(Exception):
    pass


class _Search:
    """Depth-first search over partial routings.

    Two modes share the code. With ``theta`` None the search keeps an
    incumbent and prunes nodes whose bound reaches it. With an integer
    ``theta`` it enumerates, as a generator, every routing with eta at most
    ``theta`` that satisfies the pool, and records the smallest bound it
    pruned in ``next_theta``.
    """

    def __init__(self, inst, costs, pool, ub, deadline, node_limit, limits, iteration):
        self.inst = inst
        self.costs = costs
        self.pool = pool
        self.deadline = deadline
        self.node_limit = node_limit
        self.iteration = iteration
        n, q = inst.n, inst.q
        self.n, self.q = n, q
        self.p = inst.p
        self.loc = inst.loc
        self.t = inst.travel_unit
        self.adm = [set()] + [set(admissible_cranes(inst, i, limits)) for i in range(1, n + 1)]
        self.adm_list = [[]] + [sorted(a) for a in self.adm[1:]]
        self.ancestors = {i: set() for i in range(1, n + 1)}
        for a, b in inst.prec_closure:
            self.ancestors[b].add(a)
        self.succ = inst.succ
        # cheapest entry cost into each task from anywhere
        self.min_in = [0] * (n + 1)
        for i in range(1, n + 1):
            best = min((costs.c0[k][i] - self.p[i] for k in self.adm[i]), default=math.inf)
            for j in range(1, n + 1):
                if j != i:
                    best = min(best, costs.c[j][i] - self.p[i])
            self.min_in[i] = best

        self.best = math.inf if ub is None else ub
        self.best_seqs = None
        self.theta = None
        self.next_theta = math.inf
        self.nodes = 0
        self.seqs = [[] for _ in range(q + 1)]
        self.cost = [0] * (q + 1)
        self.closed = [False] * (q + 1)
        self.final = [0] * (q + 1)
        self.routed = [False] * (n + 1)
        self.n_routed = 0
        self.nxt: dict[int, int] = {}
        self.count: list[int] = []
        self.rhs: list[int] = []
        self.n_violated = 0
        self.committed: set = set()
        self.path_bounds: list[float] = []
        self.new_cuts: list[Cut] = []
        self.sync()

    # pool bookkeeping

    def sync(self):
        """Pick up cuts added to the pool from outside the search."""
        for cut in self.pool.cuts[len(self.count) :]:
            c = sum(1 for lit in cut.literals() if lit in self.committed)
            self.count.append(c)
            self.rhs.append(cut.rhs)
            if c > cut.rhs:
                self.n_violated += 1

    def _push(self, lits) -> bool:
        index, count, rhs = self.pool.index, self.count, self.rhs
        for lit in lits:
            self.committed.add(lit)
            for cid in index.get(lit, ()):
                count[cid] += 1
                if count[cid] == rhs[cid] + 1:
                    self.n_violated += 1
        return self.n_violated == 0

    def _pop(self, lits):
        index, count, rhs = self.pool.index, self.count, self.rhs
        for lit in lits:
            self.committed.discard(lit)
            for cid in index.get(lit, ()):
                if count[cid] == rhs[cid] + 1:
                    self.n_violated -= 1
                count[cid] -= 1

    def _add_cut(self, cut: Cut):
        if not self.pool.add(cut):
            return
        self.sync()
        self.new_cuts.append(self.pool.cuts[-1])

    # bounds

    def _bound(self) -> float:
        q, cost, closed, costs = self.q, self.cost, self.closed, self.costs
        lb = 0
        open_k = []
        total = 0
        for k in range(1, q + 1):
            if closed[k]:
                lb = max(lb, self.final[k])
            else:
                open_k.append(k)
                total += cost[k]
                seq = self.seqs[k]
                lb = max(lb, cost[k] + costs.cT[seq[-1]][k] if seq else costs.empty[k])
        if self.n_routed < self.n and not open_k:
            return math.inf
        t, loc, p = self.t, self.loc, self.p
        for i in range(1, self.n + 1):
            if self.routed[i]:
                continue
            best_i = math.inf
            for k in self.adm_list[i]:
                if closed[k]:
                    continue
                seq = self.seqs[k]
                if seq:
                    v = cost[k] + t * abs(loc[seq[-1]] - loc[i]) + p[i]
                else:
                    v = costs.c0[k][i]
                v += costs.cT[i][k]
                if v < best_i:
                    best_i = v
            if best_i == math.inf:
                return math.inf
            if best_i > lb:
                lb = best_i
            total += p[i] + self.min_in[i]
        if open_k:
            lb = max(lb, -(-total // len(open_k)))
        return max(lb, self._sweep_bound(open_k))

    def _sweep_bound(self, open_k) -> float:
        """Each open crane must still visit the bays of the unrouted tasks
        no other open crane may take."""
        loc, p = self.loc, self.p
        lo = dict.fromkeys(open_k, math.inf)
        hi = dict.fromkeys(open_k, -math.inf)
        work = dict.fromkeys(open_k, 0)
        for i in range(1, self.n + 1):
            if self.routed[i]:
                continue
            only = None
            for k in self.adm_list[i]:
                if not self.closed[k]:
                    if only is not None:
                        break
                    only = k
            else:
                if only is not None:
                    work[only] += p[i]
                    lo[only] = min(lo[only], loc[i])
                    hi[only] = max(hi[only], loc[i])
        best = 0
        for k in open_k:
            if not work[k] and lo[k] == math.inf:
                continue
            seq = self.seqs[k]
            crane = self.inst.crane(k)
            if seq:
                base, x = self.cost[k], loc[seq[-1]]
            else:
                base, x = crane.ready, crane.start_bay
            a, b, e = lo[k], hi[k], crane.end_bay
            if e == 0:
                move = (b - a) + min(abs(x - a), abs(x - b))
            else:
                move = (b - a) + min(abs(x - a) + abs(b - e), abs(x - b) + abs(a - e))
            best = max(best, base + work[k] + self.t * move)
        return best

    def _tick(self):
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            raise _Timeout
        if self.deadline is not None and self.nodes % 256 == 0 and time.perf_counter() > self.deadline:
            raise _Timeout

    def _pruned(self, b) -> bool:
        if self.theta is None:
            return b >= self.best
        if b > self.theta:
            if b < self.next_theta:
                self.next_theta = b
            return True
        return False

    # precedence checks

    def _reaches(self, src: int, dst: int):
        """Path from src to dst over route successor and precedence arcs."""
        parent = {src: None}
        stack = [src]
        nxt, succ = self.nxt, self.succ
        while stack:
            u = stack.pop()
            if u == dst:
                path = [u]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            nb = list(succ[u])
            if u in nxt:
                nb.append(nxt[u])
            for v in nb:
                if v not in parent:
                    parent[v] = u
                    stack.append(v)
        return None

    def _ancestors_placeable(self, v: int, k: int) -> bool:
        for a in self.ancestors[v]:
            if self.routed[a]:
                continue
            if not any(not self.closed[m] and m != k for m in self.adm[a]):
                return False
        return True

    # moves (generators: they yield complete routings in enumeration mode)

    def _append(self, k: int, v: int):
        seq = self.seqs[k]
        u = seq[-1] if seq else SOURCE
        if u != SOURCE:
            path = self._reaches(v, u)
            if path is not None:
                seqs = seqs_with([self.seqs[m] for m in range(1, self.q + 1)], k, v)
                self._add_cut(cut_from_witness(_witness_from_cycle(self.inst, seqs, path), seqs))
                return
        if not self._ancestors_placeable(v, k):
            return
        lits = (("x", k, u, v), ("y", v, k))
        if self._push(lits):
            delta = self.costs.c[u][v] if u != SOURCE else self.costs.c0[k][v]
            seq.append(v)
            self.cost[k] += delta
            self.routed[v] = True
            self.n_routed += 1
            if u != SOURCE:
                self.nxt[u] = v
            yield from self._recurse()
            if u != SOURCE:
                del self.nxt[u]
            self.n_routed -= 1
            self.routed[v] = False
            self.cost[k] -= delta
            seq.pop()
        self._pop(lits)

    def _close(self, k: int):
        seq = self.seqs[k]
        u = seq[-1] if seq else SOURCE
        lits = (("x", k, u, SINK),)
        if self._push(lits):
            self.closed[k] = True
            self.final[k] = self.cost[k] + self.costs.cT[u][k] if seq else self.costs.empty[k]
            yield from self._recurse()
            self.closed[k] = False
        self._pop(lits)

    def _leaf(self):
        opened = [k for k in range(1, self.q + 1) if not self.closed[k]]
        lits = []
        for k in opened:
            seq = self.seqs[k]
            lits.append(("x", k, seq[-1] if seq else SOURCE, SINK))
        if self._push(lits):
            eta = 0
            for k in range(1, self.q + 1):
                if self.closed[k]:
                    c = self.final[k]
                else:
                    seq = self.seqs[k]
                    c = self.cost[k] + self.costs.cT[seq[-1]][k] if seq else self.costs.empty[k]
                eta = max(eta, c)
            if not self._pruned(eta):
                seqs = [list(self.seqs[k]) for k in range(1, self.q + 1)]
                if self.theta is None:
                    self.best, self.best_seqs = eta, seqs
                else:
                    yield seqs
        self._pop(lits)

    def _recurse(self):
        self._tick()
        if self.n_violated:
            return
        if self.n_routed == self.n:
            yield from self._leaf()
            return
        b = self._bound()
        if self._pruned(b):
            return
        k = min((m for m in range(1, self.q + 1) if not self.closed[m]), key=lambda m: (self.cost[m], m))
        seq = self.seqs[k]
        last = seq[-1] if seq else SOURCE
        cand = [v for v in range(1, self.n + 1) if not self.routed[v] and k in self.adm[v]]
        if last == SOURCE:
            cand.sort(key=lambda v: (self.costs.c0[k][v], v))
        else:
            cand.sort(key=lambda v: (self.costs.c[last][v], v))
        self.path_bounds.append(b)
        for v in cand:
            yield from self._append(k, v)
            if self.n_violated or self._pruned(b):
                break
        else:
            others = [m for m in range(1, self.q + 1) if m != k and not self.closed[m]]
            if others and all(
                any(m in self.adm[v] for m in others) for v in range(1, self.n + 1) if not self.routed[v]
            ):
                yield from self._close(k)
        self.path_bounds.pop()

    def run(self) -> MasterResult:
        try:
            for _ in self._recurse():
                pass
        except _Timeout:
            lb = min([self.best, *self.path_bounds])
            routing = make_routing(self.inst, self.best_seqs) if self.best_seqs else None
            return MasterResult("timeout", routing, lb, self.nodes, self.new_cuts)
        if self.best_seqs is None:
            return MasterResult("bound", None, self.best, self.nodes, self.new_cuts)
        routing = make_routing(self.inst, self.best_seqs)
        return MasterResult("optimal", routing, routing.eta, self.nodes, self.new_cuts)


def seqs_with(seqs, k, v):
    out = [list(s) for s in seqs]
    out[k - 1].append(v)
    return out


def solve_master(
    inst: Instance,
    costs: CostTable,
    pool: CutPool,
    ub: int | None = None,
    deadline: float | None = None,
    node_limit: int | None = None,
    limits: bool = True,
    iteration: int = 0,
) -> MasterResult:
    """Minimum-eta routing satisfying crane limits, precedence feasibility
    and every pooled cut, considering only routings with eta < ``ub``.

    ``deadline`` is a ``time.perf_counter`` value. Precedence cycles met
    during the search are turned into lifted subtour or cross-crane cuts and
    added to ``pool``.
    """
    return _Search(inst, costs, pool, ub, deadline, node_limit, limits, iteration).run()


class MasterSession:
    """Repeated master solves over a growing pool without restarting.

    Routings are enumerated level by level in eta: level ``theta`` yields
    every pooled-cut-feasible routing with eta equal to ``theta``. Since the
    pool only grows, the first surviving routing of the lowest nonempty
    level is a master optimum, and cuts added between calls prune the rest
    of the level as the enumeration continues.
    """

    def __init__(self, inst: Instance, costs: CostTable, pool: CutPool, limits: bool = True, deadline: float | None = None):
        self.args = (inst, costs, pool, None, deadline, None, limits, 0)
        self.search = None
        self._gen = None

    def next(self, ub: float | None = None, node_limit: int | None = None, iteration: int = 0) -> MasterResult:
        if self.search is None:
            # the first level is the optimum of a plain solve
            first = _Search(*self.args)
            first.best = math.inf if ub is None else ub
            first.iteration, first.node_limit = iteration, node_limit
            res = first.run()
            if res.status != "optimal":
                return res
            self.search = _Search(*self.args)
            self.search.theta = res.routing.eta
            self.search.nodes = res.nodes
            carried = res.new_cuts
        else:
            carried = []
        s = self.search
        s.iteration = iteration
        s.new_cuts = carried
        s.node_limit = None if node_limit is None else s.nodes + node_limit
        s.sync()
        ub = math.inf if ub is None else ub
        try:
            while True:
                if s.theta >= ub or s.theta == math.inf:
                    return MasterResult("bound", None, min(s.theta, ub), s.nodes, s.new_cuts)
                if self._gen is None:
                    s.next_theta = math.inf
                    self._gen = s._recurse()
                seqs = next(self._gen, None)
                if seqs is not None:
                    return MasterResult("optimal", make_routing(s.inst, seqs), s.theta, s.nodes, s.new_cuts)
                self._gen = None
                s.theta = s.next_theta
        except _Timeout:
            self._gen = None
            return MasterResult("timeout", None, min(s.theta, ub), s.nodes, s.new_cuts)
        finally:
            s.nodes, s.node_limit = 0, None


def lower_bound(inst: Instance, costs: CostTable, sequences, closed=None, limits: bool = True) -> float:
    """Admissible bound on eta over completions of a partial routing.

    ``sequences`` lists the committed route prefix per crane; ``closed``
    flags cranes whose route is final.
    """
    s = _Search(inst, costs, CutPool(), None, None, None, limits, 0)
    for k, seq in enumerate(sequences, 1):
        last = SOURCE
        for v in seq:
            s.cost[k] += costs.c0[k][v] if last == SOURCE else costs.c[last][v]
            s.routed[v] = True
            s.n_routed += 1
            last = v
        s.seqs[k] = list(seq)
    for k, flag in enumerate(closed or [], 1):
        if flag:
            s.closed[k] = True
            seq = s.seqs[k]
            s.final[k] = s.cost[k] + costs.cT[seq[-1]][k] if seq else costs.empty[k]
    if s.n_routed == inst.n:
        return max(
            s.final[k]
            if s.closed[k]
            else (s.cost[k] + costs.cT[s.seqs[k][-1]][k] if s.seqs[k] else costs.empty[k])
            for k in range(1, inst.q + 1)
        )
    return s._bound()
