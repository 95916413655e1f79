import pytest

from qcsp.formats import format_instance
from qcsp.model import SINK, SOURCE, Crane, InstanceError, Schedule, Task, derive_precedences, make_instance, make_routing, travel
from qcsp.oracle import GenParams, OracleLimitError, brute_force, generate, schedule_ok


def test_single_task_closed_form():
    inst = make_instance([Task(1, 4, 6)], [Crane(1, 3, 1, 8)], 9, travel_unit=2)
    expected = 3 + travel(inst, SOURCE, 1, 1) + 6 + travel(inst, 1, SINK, 1)
    assert brute_force(inst).makespan == expected == 3 + 6 + 6 + 8


def test_two_task(two_task):
    res = brute_force(two_task)
    assert res.makespan == 14
    assert res.routing.sequences == [[1, 2]]


def mirror(inst):
    B, q = inst.bays, inst.q
    tasks = [Task(t.id, B + 1 - t.bay, t.processing) for t in inst.tasks]
    cranes = [Crane(q + 1 - c.id, c.ready, B + 1 - c.start_bay, 0 if c.end_bay == 0 else B + 1 - c.end_bay) for c in reversed(inst.cranes)]
    return make_instance(tasks, cranes, B, inst.safety, inst.travel_unit, inst.prec)


@pytest.mark.parametrize("seed", range(8))
def test_mirror_symmetry(seed):
    inst = generate(GenParams(n=5, q=2, bays=8, seed=seed, ready=(0, 4)))
    assert brute_force(inst).makespan == brute_force(mirror(inst)).makespan


def test_cap():
    inst = generate(GenParams(n=9, q=2, bays=10, seed=1))
    with pytest.raises(OracleLimitError):
        brute_force(inst)


def test_generate_deterministic():
    p = GenParams(n=7, q=3, bays=8, nsim_density=0.5, seed=42)
    assert format_instance(generate(p)) == format_instance(generate(p))
    assert format_instance(generate(p)) != format_instance(generate(GenParams(n=7, q=3, bays=8, nsim_density=0.5, seed=43)))


def test_one_task_per_bay():
    inst = generate(GenParams(n=8, q=2, bays=8, tasks_per_bay=1.0, seed=5))
    assert sorted(t.bay for t in inst.tasks) == list(range(1, 9))
    assert inst.prec == frozenset()


def test_full_density_keeps_rule_pairs():
    inst = generate(GenParams(n=8, q=2, bays=4, tasks_per_bay=2.5, prec_density=1.0, seed=9))
    assert inst.prec == derive_precedences(inst.tasks)


def test_thinning():
    inst = generate(GenParams(n=8, q=2, bays=4, tasks_per_bay=2.5, prec_density=0.0, seed=9))
    assert inst.prec == frozenset()


def test_infeasible_params():
    with pytest.raises(InstanceError):
        generate(GenParams(n=3, q=4, bays=4, safety=1))
    with pytest.raises(InstanceError):
        generate(GenParams(processing=(5, 1)))


def test_limits_never_help():
    for seed in range(10):
        inst = generate(GenParams(n=5, q=2, bays=6, seed=seed))
        assert brute_force(inst, limits=False).makespan <= brute_force(inst).makespan


def test_schedule_ok(two_task):
    routing = make_routing(two_task, [[1, 2]])
    assert schedule_ok(two_task, routing, Schedule({1: 5, 2: 14}, {1: 14}, 14))
    assert not schedule_ok(two_task, routing, Schedule({1: 5, 2: 13}, {1: 13}, 13))


def test_brute_force_schedule_ok():
    for seed in range(10):
        inst = generate(GenParams(n=5, q=3, bays=8, seed=seed, nsim_density=0.4))
        res = brute_force(inst)
        assert schedule_ok(inst, res.routing, res.schedule)
