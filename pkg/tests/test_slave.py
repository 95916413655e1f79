import itertools

import pytest

from qcsp.master import precedence_feasible
from qcsp.model import Crane, InstanceError, Task, make_instance, make_routing
from qcsp.oracle import GenParams, all_routings, generate
from qcsp.slave import DisjunctiveGraph, build_graph, fix_z_from_routing, longest_paths, solve_slave


def test_single_crane_has_no_disjunctions(two_task):
    g = build_graph(two_task, make_routing(two_task, [[1, 2]]))
    assert g.disjunctions == []
    _, free = fix_z_from_routing(two_task, make_routing(two_task, [[1, 2]]))
    assert free == []
    sol = solve_slave(g)
    assert sol.makespan == 14 and sol.completion == {1: 5, 2: 14}


def test_same_bay_pair_weights(conflict):
    g = build_graph(conflict, make_routing(conflict, [[1, 3], [2, 4]]))
    assert [(i, j) for i, j, _, _ in g.disjunctions] == [(1, 2)]
    # delta is 2 either way round for a shared bay with safety 1
    assert g.disjunctions[0][2:] == (12, 12)


def test_nonsim_pair_without_gap():
    inst = make_instance([Task(1, 2, 4), Task(2, 8, 6)], [Crane(1, 0, 2, 0), Crane(2, 0, 8, 0)], 10, nonsim=[(1, 2)])
    g = build_graph(inst, make_routing(inst, [[1], [2]]))
    assert g.disjunctions == [(1, 2, 6, 4)]
    assert solve_slave(g).makespan == 10


def test_cross_crane_prec_fixed():
    inst = make_instance([Task(1, 2, 4), Task(2, 8, 6)], [Crane(1, 0, 2, 0), Crane(2, 0, 8, 0)], 10, prec=[(1, 2)])
    routing = make_routing(inst, [[1], [2]])
    z, free = fix_z_from_routing(inst, routing)
    assert z[(1, 2)] == 1 and free == []
    assert solve_slave(build_graph(inst, routing)).completion == {1: 4, 2: 10}


def test_infeasible_routing_rejected():
    inst = make_instance([Task(1, 2, 4), Task(2, 3, 6)], [Crane(1, 0, 2, 0)], 10, prec=[(1, 2)])
    with pytest.raises(InstanceError):
        build_graph(inst, make_routing(inst, [[2, 1]]))
    with pytest.raises(InstanceError):
        build_graph(inst, make_routing(inst, [[1]]))


def test_longest_paths_chain():
    g = DisjunctiveGraph(1, 1, [(2, 1, 5), (1, 3, 2)], [])
    D, C, W = longest_paths(g)
    assert (D, C, W) == ({1: 5}, {1: 7}, 7)


def test_longest_paths_cycle():
    g = DisjunctiveGraph(2, 1, [(3, 1, 1), (3, 2, 1), (1, 4, 0), (2, 4, 0)], [(1, 2, 1, 1)])
    assert longest_paths(g, [0]) is not None
    g2 = DisjunctiveGraph(2, 1, [(3, 1, 1), (1, 2, 1), (2, 1, 1), (2, 4, 0)], [])
    assert longest_paths(g2) is None


def test_non_interfering_routing_has_w_equal_eta():
    inst = make_instance([Task(1, 1, 4), Task(2, 2, 6), Task(3, 8, 5), Task(4, 9, 1)], [Crane(1, 0, 1, 0), Crane(2, 0, 8, 0)], 10)
    routing = make_routing(inst, [[1, 2], [3, 4]])
    assert solve_slave(build_graph(inst, routing)).makespan == routing.eta


def _exhaustive(g):
    best = None
    for orient in itertools.product((0, 1), repeat=len(g.disjunctions)):
        res = longest_paths(g, list(orient))
        if res is not None and (best is None or res[2] < best):
            best = res[2]
    return best


@pytest.mark.parametrize("seed", range(30))
def test_slave_matches_exhaustive_orientation(seed):
    inst = generate(GenParams(n=5 + seed % 3, q=2 + seed % 2, bays=7, nsim_density=0.3, ready=(0, 5), seed=seed))
    checked = 0
    for _, seqs in itertools.islice(all_routings(inst), 0, None, 7):
        routing = make_routing(inst, seqs)
        if not precedence_feasible(inst, routing)[0]:
            continue
        g = build_graph(inst, routing)
        if len(g.disjunctions) > 10:
            continue
        sol = solve_slave(g)
        assert sol.makespan == _exhaustive(g)
        assert sol.makespan >= routing.eta
        assert longest_paths(g, sol.orientation)[2] == sol.makespan
        checked += 1
        if checked == 25:
            break


def test_ub_prunes(conflict):
    g = build_graph(conflict, make_routing(conflict, [[1, 3], [2, 4]]))
    best = solve_slave(g).makespan
    capped = solve_slave(g, ub=best)
    assert capped.makespan >= best and not capped.optimal
    assert solve_slave(g, ub=best + 1).makespan == best
