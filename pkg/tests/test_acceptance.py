"""Acceptance criteria, one test each.

Every test prints a ``criterion k PASS`` or ``criterion k FAIL`` line (shown
even under captured output) before asserting.
"""

import io
import math
import os
import statistics
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from cprflow import SolverConfig, eflow, ipm, solve
from cprflow.cli import RunConfig, TraceWriter, bench_jobs, run_bench, trend_report
from cprflow.core import (UNCAPACITATED, ProblemInstance, Status, adjoint_slacks,
                          apply_incidence, format_solution, weak_components)
from cprflow.crossover import TIE_TOLERANCE, crossover, materialize
from cprflow.generators import generate, suite_instance
from cprflow.init import balance_arcs, potential_parameters
from cprflow.oracle import exact_electrical, ssp_mincost
from cprflow.preprocess import reduce_instance

from conftest import certified_point, random_network

SUITE_SIZE = 500
TESTS_DIR = os.path.dirname(os.path.abspath(__file__))


def report(capsys, k, failures, detail=""):
    verdict = "PASS" if not failures else "FAIL"
    with capsys.disabled():
        print(f"\ncriterion {k} {verdict}: {detail}")
        for f in failures[:5]:
            print(f"    {f}")
    assert not failures, failures[:5]


def run_instance(index: int):
    """Solve suite instance ``index`` with a trace; returns (instance, solution, trace, text)."""
    inst = suite_instance(index)
    buf = io.StringIO()
    writer = TraceWriter(buf, RunConfig(input=f"suite-{index}", seed=index))
    sol = solve(inst, SolverConfig(seed=index), trace=writer)
    writer.close(sol)
    return inst, sol, buf.getvalue().encode(), format_solution(sol).encode()


def suite_bytes(count: int = SUITE_SIZE) -> bytes:
    parts = []
    for i in range(count):
        _, _, trace, text = run_instance(i)
        parts += [trace, text]
    return b"".join(parts)


def components(instance: ProblemInstance):
    """Connected pieces of the reduced instance that go through the interior-point loop."""
    red = reduce_instance(instance)
    if red.status is not None:
        return
    reduced = red.instance
    count, labels = weak_components(reduced)
    for comp in range(count):
        nodes = np.flatnonzero(labels == comp)
        arcs = np.flatnonzero(labels[reduced.tail] == comp)
        if 3 * len(arcs) < 4 or int(reduced.demand[nodes].sum()) != 0:
            continue
        index = np.full(reduced.node_count, -1, dtype=np.int64)
        index[nodes] = np.arange(len(nodes))
        yield ProblemInstance(len(nodes), index[reduced.tail[arcs]], index[reduced.head[arcs]],
                              reduced.demand[nodes], reduced.cost[arcs], reduced.capacity[arcs])


@pytest.fixture(scope="module")
def suite():
    solve(suite_instance(0))  # compile kernels outside the timed run
    instances = [suite_instance(i) for i in range(SUITE_SIZE)]
    started = time.perf_counter()
    solutions = [solve(inst, SolverConfig(seed=i)) for i, inst in enumerate(instances)]
    seconds = time.perf_counter() - started
    oracle = [ssp_mincost(inst) for inst in instances]
    return list(zip(instances, solutions)), oracle, seconds


# 1 -------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence(suite, capsys):
    runs, oracle, seconds = suite
    failures = []
    statuses = {}
    for i, ((inst, sol), ref) in enumerate(zip(runs, oracle)):
        statuses[ref.status] = statuses.get(ref.status, 0) + 1
        if sol.status is not ref.status or sol.objective != ref.objective:
            failures.append(f"instance {i}: solver {sol.status.value} {sol.objective}, "
                            f"oracle {ref.status.value} {ref.objective}")
    if seconds >= 60:
        failures.append(f"suite took {seconds:.1f} s")
    mix = ", ".join(f"{k.value} {v}" for k, v in sorted(statuses.items(), key=lambda kv: kv[0].value))
    report(capsys, 1, failures, f"{SUITE_SIZE} instances ({mix}) match; {seconds:.1f} s")


# 2 -------------------------------------------------------------------------

def test_criterion_2_initial_window(capsys):
    failures = []
    networks = 0
    worst = -math.inf
    for i in range(SUITE_SIZE):
        for sub in components(suite_instance(i)):
            aux, start = balance_arcs(sub)
            networks += 1
            t, gamma = start.t, start.gamma
            for a, (x, s) in enumerate(zip(start.x, start.s)):
                prod = Fraction(x) * Fraction(s)
                if not t <= prod <= t + gamma ** 2:
                    failures.append(f"instance {i} arc {a}: x s = {prod} outside [{t}, {t + gamma ** 2}]")
            m1 = aux.arc_count
            p, q = potential_parameters(m1)
            bound = (m1 + p) / ((m1 // 3) * gamma) + p * math.log(m1 ** 2 * gamma ** 3)
            p0 = ipm.potential(start.x, start.s, q)
            worst = max(worst, p0 - bound)
            if p0 > bound + 1e-9:
                failures.append(f"instance {i}: P0 = {p0} exceeds {bound}")
    report(capsys, 2, failures, f"{networks} auxiliary networks; max P0 - bound = {worst:.3f}")


# 3 and 4 -------------------------------------------------------------------

def suite_records(runs):
    for i, (_, sol) in enumerate(runs):
        for comp in sol.info.get("records", []):
            for rec in comp:
                yield i, rec


def stepwise_trajectory(sub, seed):
    """Single IPM steps taken one call at a time, each checked outside the compiled loop."""
    aux, start = balance_arcs(sub)
    point = start.to_float()
    rng = np.random.Generator(np.random.Philox(seed))
    while point.duality_gap >= ipm.TARGET_GAP:
        res = ipm.reduce_gap(aux, point, rng=rng, max_iterations=1)
        (rec,) = res.records
        yield aux, point, res.point, rec
        point = res.point


def test_criterion_3_per_step_decrease(suite, capsys):
    runs, _, _ = suite
    failures = []
    low = {ipm.PRIMAL: math.inf, ipm.DUAL: math.inf}
    need = {ipm.PRIMAL: 1 / 64 - 1e-9, ipm.DUAL: 1 / 12 - 1e-9}
    steps = 0
    for i, rec in suite_records(runs):
        steps += 1
        low[rec.kind] = min(low[rec.kind], rec.decrease)
        if rec.decrease < need[rec.kind]:
            failures.append(f"instance {i} step {rec.iteration} ({rec.kind}): {rec.decrease}")
    # independent recomputation of the potential on a slice of the suite
    checked = 0
    for i in range(40):
        for sub in components(suite_instance(i)):
            for aux, before, after, rec in stepwise_trajectory(sub, i):
                drop = (ipm.potential(before.x, before.s, before.q)
                        - ipm.potential(after.x, after.s, after.q))
                checked += 1
                if drop < need[rec.kind]:
                    failures.append(f"recomputed instance {i} ({rec.kind}): {drop}")
    report(capsys, 3, failures, f"{steps} steps; min primal {low[ipm.PRIMAL]:.4f}, "
                                f"min dual {low[ipm.DUAL]:.4f}; {checked} steps recomputed")


def test_criterion_4_interiority(suite, capsys):
    runs, _, _ = suite
    failures = []
    worst = math.inf
    steps = 0
    for i, rec in suite_records(runs):
        steps += 1
        if rec.kind == ipm.PRIMAL:
            worst = min(worst, rec.min_ratio)
            if rec.min_ratio < 3 / 4 - 1e-12:
                failures.append(f"instance {i} step {rec.iteration}: ratio {rec.min_ratio}")
    checked = 0
    for i in range(40):
        for sub in components(suite_instance(i)):
            for aux, before, after, rec in stepwise_trajectory(sub, i):
                checked += 1
                if np.any(after.x <= 0) or np.any(after.s <= 0):
                    failures.append(f"recomputed instance {i}: iterate left the interior")
                if np.abs(after.s - adjoint_slacks(aux, after.y)).max() > 1e-6 * (1 + np.abs(after.s).max()):
                    failures.append(f"recomputed instance {i}: slacks inconsistent with y")
                if rec.kind == ipm.PRIMAL:
                    ratio = float(np.min(after.x / before.x))
                    worst = min(worst, ratio)
                    if ratio < 3 / 4 - 1e-12:
                        failures.append(f"recomputed instance {i}: ratio {ratio}")
    report(capsys, 4, failures, f"{steps} steps; {checked} recomputed; min primal ratio {worst:.4f}")


# 5 -------------------------------------------------------------------------

def test_criterion_5_iteration_bound_and_trend(suite, capsys):
    runs, _, _ = suite
    failures = []
    worst = 0.0
    count = 0
    for i, (_, sol) in enumerate(runs):
        for comp in sol.info.get("components", []):
            if comp["method"] != "ipm":
                continue
            count += 1
            limit = 64 * comp["initial_potential"] + 1
            worst = max(worst, comp["iterations"] / limit)
            if comp["iterations"] > limit:
                failures.append(f"instance {i}: {comp['iterations']} > {limit:.1f}")
    rows = run_bench(bench_jobs([8, 16, 32, 64], repeats=3, seed=0), workers=1)
    trend = trend_report(rows)
    # same ratios computed here from the raw rows
    ratios = []
    for n in (8, 16, 32, 64):
        group = [r for r in rows if r["n"] == n and r["ipm_iterations"]]
        med = statistics.median(r["ipm_iterations"] for r in group)
        m = statistics.median(r["m"] for r in group)
        gamma = statistics.median(r["gamma"] for r in group)
        ratios.append(med / (math.sqrt(m) * math.log(max(n * gamma, 3))))
    spread = max(ratios) / ratios[0]
    if spread > 3 or not trend["within_factor"]:
        failures.append(f"trend spread {spread:.2f} (report {trend['spread']:.2f})")
    if not np.allclose(ratios, list(trend["ratios"].values())):
        failures.append("trend report disagrees with direct computation")
    report(capsys, 5, failures, f"{count} components, max iterations / (64 P0 + 1) = {worst:.3f}; "
                                f"trend ratios {', '.join(f'{r:.2f}' for r in ratios)}, "
                                f"spread {spread:.2f}")


# 6 -------------------------------------------------------------------------

def test_criterion_6_electrical_certificate(capsys):
    failures = []
    for k in range(100):
        rng = np.random.default_rng(1000 + k)
        n = int(rng.integers(2, 13))
        net = random_network(rng, n, int(rng.integers(0, 2 * n)))
        delta = [1 / 8, 1e-2, 1e-4][k % 3]
        backend = eflow.BACKENDS[k % 2]
        sol = eflow.solve(net, delta, np.random.Generator(np.random.Philox(k)), backend=backend)
        f_star, pi_star = exact_electrical(net)
        r = net.resistance
        e_err = float((r * sol.flow ** 2).sum() - (r * f_star ** 2).sum())
        d = (sol.voltages - pi_star)
        dd = d[net.head] - d[net.tail]
        v_err = float((dd * dd / r).sum())
        cons = float(np.abs(apply_incidence(net, sol.flow) - net.sources).max())
        g = float(sol.gap)
        if e_err > g + 1e-7 or v_err > g + 1e-7 or cons > 1e-7:
            failures.append(f"network {k}: energy err {e_err:.3g}, voltage err {v_err:.3g}, "
                            f"gap {g:.3g}, conservation {cons:.3g}")
        if not g < delta or abs(g - eflow.gap_by_definition(net, sol.flow, sol.voltages)) > 1e-7:
            failures.append(f"network {k}: reported gap {g} vs delta {delta}")
    report(capsys, 6, failures, "100 networks with at most 12 nodes")


# 7 -------------------------------------------------------------------------

def as_instance(aux):
    return ProblemInstance(aux.node_count, aux.tail, aux.head, aux.demand, aux.cost,
                           [UNCAPACITATED] * aux.arc_count)


def test_criterion_7_crossover(capsys):
    failures = []
    done = 0
    index = 0
    while done < 200:
        index += 1
        inst = generate(("random-connected", "grid", "transshipment")[index % 3],
                        int(3 + index % 8), int(4 + index % 8 + index % 5), seed=index,
                        negative_costs=index % 2 == 0)
        got = certified_point(inst, seed=index)
        if got is None:
            continue
        done += 1
        reduced, aux, res_ipm = got
        y0 = res_ipm.point.y
        if not res_ipm.point.duality_gap < 1:
            failures.append(f"input {index}: gap {res_ipm.point.duality_gap} not certified")
        res = crossover(aux, y0)
        y = res.potentials
        if y.dtype != np.int64 or np.any(adjoint_slacks(aux, y) < 0):
            failures.append(f"input {index}: potentials not integral or slack negative")
        b = aux.demand.astype(object)
        scale = int(np.abs(aux.demand).sum())
        prev = materialize(aux, y0, res, 1)
        settled = {res.start}
        for k in range(2, aux.node_count + 1):
            yk = materialize(aux, y0, res, k)
            rec = res.history[k - 2]
            if adjoint_slacks(aux, yk)[rec.arc] != 0 or rec.node in settled:
                failures.append(f"input {index} round {k}: no single new tight arc")
            ends = {int(aux.tail[rec.arc]), int(aux.head[rec.arc])}
            if ends - settled != {rec.node}:
                failures.append(f"input {index} round {k}: tight arc does not join the tree")
            settled.add(rec.node)
            # ties within TIE_TOLERANCE can leave a slack of that size for a later round
            if b @ yk < b @ prev - TIE_TOLERANCE * scale:
                failures.append(f"input {index} round {k}: b^T y decreased")
            prev = yk
        if res.objective != ssp_mincost(as_instance(aux), enforce_limits=False).objective:
            failures.append(f"input {index}: crossover objective differs from the optimum")
        ref = ssp_mincost(reduced)
        if ref.status is Status.OPTIMAL and ref.objective != res.objective:
            failures.append(f"input {index}: {res.objective} vs reduced optimum {ref.objective}")
    report(capsys, 7, failures, f"{done} certified inputs")


# 8 -------------------------------------------------------------------------

def test_criterion_8_sufficiency(capsys):
    failures = []
    worst = 0.0
    checked = 0
    index = 0
    while checked < 50:
        index += 1
        n = 3 + index % 4
        inst = generate("random-connected", n, n + index % 5, seed=index)
        red = reduce_instance(inst)
        if red.status is not None or weak_components(red.instance)[0] != 1:
            continue
        aux, start = balance_arcs(red.instance)
        rng = np.random.Generator(np.random.Philox(index))
        point = ipm.reduce_gap(aux, start.to_float(), rng=rng, max_iterations=index % 6).point
        r, chi, _ = ipm.projection_inputs(aux, point.x, point.s, point.q)
        net = eflow.ResistiveNetwork(aux.node_count, aux.tail, aux.head, r, chi)
        f_star, pi_star = exact_electrical(net)
        e_star = float((r * f_star ** 2).sum())
        eps = 1 / (16 * point.q ** 2)

        def errors(f, pi):
            d = pi - pi_star
            dd = d[net.head] - d[net.tail]
            return float((r * f * f).sum()) - e_star, float((dd * dd / r).sum())

        def accurate(f, pi, g):
            e_err, v_err = errors(f, pi)
            return e_err <= eps * e_star and v_err <= eps * e_star

        sol = eflow.solve(net, ipm.DELTA, rng, stop=accurate)
        checked += 1
        if not accurate(sol.flow, sol.voltages, sol.gap):
            failures.append(f"point {index}: eflow stopped short of relative accuracy")
        g = float(eflow.gap_by_definition(net, sol.flow, sol.voltages))
        worst = max(worst, g)
        if g > 1 / 8:
            failures.append(f"point {index}: gap {g} > 1/8 (q = {point.q})")
    report(capsys, 8, failures, f"{checked} IPM points; largest gap {worst:.2e}")


# 9 -------------------------------------------------------------------------

def test_criterion_9_determinism(capsys, tmp_path):
    outs = [tmp_path / f"run{k}.bin" for k in range(2)]
    procs = [subprocess.Popen(
        [sys.executable, "-c", "from test_acceptance import suite_bytes; "
                               f"open({str(out)!r}, 'wb').write(suite_bytes())"],
        cwd=TESTS_DIR, env={**os.environ, "PYTHONHASHSEED": str(k)})
        for k, out in enumerate(outs)]
    codes = [p.wait() for p in procs]
    assert codes == [0, 0]
    first, second = (out.read_bytes() for out in outs)
    failures = [] if first == second else [f"outputs differ ({len(first)} vs {len(second)} bytes)"]
    report(capsys, 9, failures, f"{SUITE_SIZE} traces and solutions, {len(first)} bytes, identical "
                                "across two processes")
