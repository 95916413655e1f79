"""Acceptance criteria, one test per criterion.

Each test records PASS, FAIL or SKIP with a short detail line; the lines are
printed in the terminal summary. Benchmark criteria read instance files from
``$QCSP_BENCH_DIR`` (``<name>.qcsp`` canonical, or ``<name>.txt`` in the
Kim-Park keyed layout) and skip when the files are absent.
"""

from __future__ import annotations

import os
import random
import time
from functools import lru_cache
from pathlib import Path

import pytest

from qcsp.decomp import DriverConfig, Status, run
from qcsp.formats import convert, read_instance
from qcsp.model import InstanceError, Routing, Schedule, is_unidirectional, make_routing, validate_schedule
from qcsp.oracle import GenParams, all_routings, brute_force, generate, schedule_ok
from qcsp.slave import schedule_routing

# pinned limits and tolerances (makespans are integers: exact match)
SET_A = {"k13": 151, "k14": 182, "k15": 171, "k16": 104, "k17": 151, "k18": 125, "k19": 181, "k20": 133, "k21": 155, "k22": 180}
SET_B = {"k23": 192, "k24": 222, "k25": 246, "k26": 213, "k27": 219, "k28": 177, "k29": 269, "k30": 297, "k31": 190, "k32": 197}
SET_CD = {"k33": 201, "k34": 239, "k35": 228, "k37": 170, "k45": 278, "k46": 230, "k47": 264}
ONE_ITERATION = ("k33", "k34", "k35", "k47")
UNIDIRECTIONAL = ("k45", "k46", "k47")
LIMIT_A = 300.0
LIMIT_B = 1800.0
MIN_CONVERGED_B = 7
LIMIT_CD = 7200.0
RANDOM_SUITE = 200
RANDOM_BUDGET = 1800.0
MONOTONE_SUITE = 50
VALIDATOR_SAMPLES = 1000


def bench_file(name: str) -> Path | None:
    root = os.environ.get("QCSP_BENCH_DIR")
    if not root:
        return None
    for suffix in (".qcsp", ".txt"):
        path = Path(root) / f"{name}{suffix}"
        if path.is_file():
            return path
    return None


def load_bench(path: Path):
    if path.suffix == ".qcsp":
        return read_instance(path)
    return convert(path.read_text(), "kim")


@lru_cache(maxsize=None)
def solve_bench(name: str, limit: float):
    path = bench_file(name)
    if path is None:
        return None
    inst = load_bench(path)
    return inst, run(inst, DriverConfig(time_limit=limit))


def missing(names) -> list[str]:
    return [n for n in names if bench_file(n) is None]


def skip_missing(acceptance, number, title, names):
    absent = missing(names)
    if absent:
        detail = f"benchmark files not found ({len(absent)} of {len(names)}); set QCSP_BENCH_DIR"
        acceptance(number, title, "SKIP", detail)
        pytest.skip(detail)


# --- criteria 1-5: published benchmark makespans ------------------------------


def test_benchmark_set_a(acceptance):
    title = "set A (n=10, q=2) exact makespans"
    skip_missing(acceptance, 1, title, SET_A)
    wrong = []
    for name, expected in SET_A.items():
        _, rep = solve_bench(name, LIMIT_A)
        if rep.status is not Status.OPTIMAL or rep.W != expected:
            wrong.append(f"{name}: {rep.status.value} W={rep.W} lb={rep.lb} ub={rep.ub} (want {expected})")
    acceptance(1, title, "FAIL" if wrong else "PASS", "; ".join(wrong) or f"all {len(SET_A)} match within {LIMIT_A:.0f}s")
    assert not wrong


def test_benchmark_set_b(acceptance):
    title = "set B (n=15, q=2) exact makespans"
    skip_missing(acceptance, 2, title, SET_B)
    converged, wrong = 0, []
    for name, expected in SET_B.items():
        _, rep = solve_bench(name, LIMIT_B)
        if rep.status is Status.OPTIMAL:
            converged += 1
            if rep.W != expected:
                wrong.append(f"{name}: W={rep.W} (want {expected})")
    ok = converged >= MIN_CONVERGED_B and not wrong
    detail = f"{converged}/{len(SET_B)} converged" + (f"; {'; '.join(wrong)}" if wrong else "")
    acceptance(2, title, "PASS" if ok else "FAIL", detail)
    assert ok


def test_benchmark_set_cd(acceptance):
    title = "sets C/D (q=3) converged values match, bounds bracket otherwise"
    skip_missing(acceptance, 3, title, SET_CD)
    wrong = []
    for name, expected in SET_CD.items():
        _, rep = solve_bench(name, LIMIT_CD)
        if rep.status is Status.OPTIMAL and rep.W != expected:
            wrong.append(f"{name}: W={rep.W} (want {expected})")
        elif rep.status is not Status.OPTIMAL and not rep.lb <= expected <= rep.ub:
            wrong.append(f"{name}: [{rep.lb}, {rep.ub}] excludes {expected}")
    acceptance(3, title, "FAIL" if wrong else "PASS", "; ".join(wrong))
    assert not wrong


def test_one_iteration(acceptance):
    title = "one master solve with W = eta on k33, k34, k35, k47"
    skip_missing(acceptance, 4, title, ONE_ITERATION)
    wrong, checked = [], 0
    for name in ONE_ITERATION:
        _, rep = solve_bench(name, LIMIT_CD)
        if rep.status is not Status.OPTIMAL:
            continue
        checked += 1
        if rep.iterations != 1 or rep.W != rep.routing.eta:
            wrong.append(f"{name}: {rep.iterations} iterations, W={rep.W}, eta={rep.routing.eta}")
    acceptance(4, title, "FAIL" if wrong else "PASS", "; ".join(wrong) or f"{checked} converged instances checked")
    assert not wrong


def test_unidirectional(acceptance):
    title = "optimal schedules of k45, k46, k47 are unidirectional"
    skip_missing(acceptance, 5, title, UNIDIRECTIONAL)
    wrong = []
    for name in UNIDIRECTIONAL:
        inst, rep = solve_bench(name, LIMIT_CD)
        if rep.status is Status.OPTIMAL and not is_unidirectional(inst, rep.routing)[0]:
            wrong.append(f"{name}: {is_unidirectional(inst, rep.routing)[1]}")
    acceptance(5, title, "FAIL" if wrong else "PASS", "; ".join(wrong))
    assert not wrong


# --- criteria 6 and 8: random suite against the oracle ------------------------


def random_params(seed: int) -> GenParams:
    rng = random.Random(seed)
    q = rng.choice((2, 3))
    safety = rng.choice((0, 1)) if q == 3 else rng.choice((0, 1, 2))
    bays = rng.randint(max(q * (safety + 1), 4), 8)
    return GenParams(
        n=rng.randint(3, 7),
        q=q,
        bays=bays,
        safety=safety,
        travel_unit=rng.choice((1, 1, 2)),
        tasks_per_bay=rng.choice((1.0, 1.5, 2.0, 3.0)),
        prec_density=rng.choice((0.5, 1.0)),
        nsim_density=rng.choice((0.0, 0.0, 0.3)),
        processing=(1, rng.choice((10, 30))),
        ready=(0, rng.choice((0, 0, 10))),
        free_end=rng.choice((1.0, 0.5)),
        seed=seed,
    )


@lru_cache(maxsize=None)
def random_suite():
    t0 = time.perf_counter()
    runs = []
    for seed in range(RANDOM_SUITE):
        inst = generate(random_params(seed))
        runs.append((seed, inst, run(inst), brute_force(inst).makespan))
    return runs, time.perf_counter() - t0


def test_oracle_equivalence(acceptance):
    title = f"{RANDOM_SUITE} random instances: decomposition W equals brute-force W"
    runs, elapsed = random_suite()
    wrong = [f"seed {s}: {rep.status.value} W={rep.W} oracle={w}" for s, _, rep, w in runs if rep.status is not Status.OPTIMAL or rep.W != w]
    ok = not wrong and elapsed <= RANDOM_BUDGET
    acceptance(6, title, "PASS" if ok else "FAIL", "; ".join(wrong[:5]) or f"{elapsed:.0f}s of {RANDOM_BUDGET:.0f}s")
    assert not wrong
    assert elapsed <= RANDOM_BUDGET


def invariant_breaches(inst, rep) -> list[str]:
    out = []
    for a, b in zip(rep.trace, rep.trace[1:]):
        if b.lb < a.lb:
            out.append(f"lb fell at iteration {b.iteration}")
        if b.ub > a.ub:
            out.append(f"ub rose at iteration {b.iteration}")
    out += [f"lb > ub at iteration {tp.iteration}" for tp in rep.trace if tp.lb > tp.ub]
    out += [f"W < eta at iteration {tp.iteration}" for tp in rep.trace if tp.W is not None and tp.W < tp.eta]
    for routing, cuts in rep.emitted:
        out += [f"{c.family.value} cut not violated by its routing" for c in cuts if not c.violated_by(routing)]
    if rep.schedule is not None:
        out += [str(v) for v in validate_schedule(inst, rep.routing, rep.schedule)]
    if rep.status is Status.OPTIMAL and not rep.lb == rep.ub == rep.W:
        out.append(f"optimal but lb={rep.lb} ub={rep.ub} W={rep.W}")
    return out


def test_invariants(acceptance):
    title = "trace monotonicity, cut violation, schedule validity, W >= eta"
    runs, _ = random_suite()
    wrong = []
    for seed, inst, rep, _ in runs:
        wrong += [f"seed {seed}: {msg}" for msg in invariant_breaches(inst, rep)]
    iterations = sum(rep.iterations for _, _, rep, _ in runs)
    acceptance(8, title, "FAIL" if wrong else "PASS", "; ".join(wrong[:5]) or f"{len(runs)} runs, {iterations} iterations")
    assert not wrong


# --- criterion 7: crane limits never lower the optimum ------------------------


def monotone_params(seed: int) -> GenParams:
    # a crane working outside its range blocks its neighbour, so limits only
    # cost time through travel and unequal ready times
    rng = random.Random(10_000 + seed)
    return GenParams(
        n=rng.randint(3, 6),
        q=2,
        bays=rng.randint(4, 7),
        safety=1,
        tasks_per_bay=rng.choice((1.0, 1.5)),
        processing=(1, 20),
        ready=(0, 15),
        free_end=0.5,
        seed=10_000 + seed,
    )


def test_limit_monotonicity(acceptance):
    title = f"{MONOTONE_SUITE} random instances: optimum with limits >= without, strict at least once"
    wrong, strict = [], 0
    for seed in range(MONOTONE_SUITE):
        inst = generate(monotone_params(seed))
        with_limits = run(inst, DriverConfig(limits=True))
        without = run(inst, DriverConfig(limits=False))
        if with_limits.status is not Status.OPTIMAL or without.status is not Status.OPTIMAL:
            wrong.append(f"seed {seed}: not solved")
            continue
        if with_limits.W < without.W:
            wrong.append(f"seed {seed}: {with_limits.W} < {without.W}")
        if without.W != brute_force(inst, limits=False).makespan:
            wrong.append(f"seed {seed}: unlimited W disagrees with oracle")
        strict += with_limits.W > without.W
    ok = not wrong and strict >= 1
    acceptance(7, title, "PASS" if ok else "FAIL", "; ".join(wrong[:5]) or f"strict on {strict} of {MONOTONE_SUITE}")
    assert not wrong
    assert strict >= 1


# --- criterion 9: validator against an independent checker --------------------


def sample_solution(rng: random.Random, inst):
    """A random routing and schedule: feasible-looking ones are built from
    an optimal slave schedule and then sometimes perturbed."""
    n, q = inst.n, inst.q
    if rng.random() < 0.6:
        for _ in range(20):
            seqs = rng.choice([s for _, s in all_routings(inst, limits=rng.random() < 0.8)] or [[[]] * q])
            routing = make_routing(inst, seqs)
            try:
                sol = schedule_routing(inst, routing)
            except InstanceError:
                continue
            sched = sol.schedule()
            D, C = dict(sched.completion), dict(sched.crane_completion)
            W = sched.makespan
            roll = rng.random()
            if roll < 0.5:
                i = rng.randint(1, n)
                D[i] += rng.choice((-3, -2, -1, 1, 2, 3))
            elif roll < 0.6:
                k = rng.randint(1, q)
                C[k] += rng.choice((-1, 1))
            elif roll < 0.7:
                W += rng.choice((-1, 1))
            return routing, Schedule(D, C, W)
    seqs = [[] for _ in range(q)]
    for i in rng.sample(range(1, n + 1), n):
        seqs[rng.randrange(q)].append(i)
    routing = Routing(seqs)
    D = {i: rng.randint(0, 60) for i in range(1, n + 1)}
    C = {k: rng.randint(0, 70) for k in range(1, q + 1)}
    return routing, Schedule(D, C, max(C.values()))


def test_validator_equivalence(acceptance):
    title = f"validator agrees with a time-slot checker on {VALIDATOR_SAMPLES} samples"
    rng = random.Random(2024)
    wrong, feasible = [], 0
    for sample in range(VALIDATOR_SAMPLES):
        params = GenParams(
            n=rng.randint(2, 6),
            q=rng.choice((1, 2, 3)),
            bays=8,
            safety=rng.choice((0, 1)),
            nsim_density=0.3,
            processing=(0, 9),
            ready=(0, 5),
            free_end=0.5,
            seed=sample,
        )
        inst = generate(params)
        routing, sched = sample_solution(rng, inst)
        limits = rng.random() < 0.8
        verdict = not validate_schedule(inst, routing, sched, limits)
        if verdict != schedule_ok(inst, routing, sched, limits):
            wrong.append(f"sample {sample}: validator says {verdict}")
        feasible += verdict
    balanced = 100 <= feasible <= VALIDATOR_SAMPLES - 100
    ok = not wrong and balanced
    acceptance(9, title, "PASS" if ok else "FAIL", "; ".join(wrong[:5]) or f"{feasible} feasible, {VALIDATOR_SAMPLES - feasible} infeasible")
    assert not wrong
    assert balanced, f"only {feasible} feasible samples"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-rs"]))
