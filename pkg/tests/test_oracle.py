from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from cprflow.core import UNCAPACITATED, ProblemInstance, Status, adjoint_slacks, validate_solution
from cprflow.eflow import ResistiveNetwork, tree_flow, build_spanning_tree
from cprflow.oracle import (OracleLimitError, brute_force_mincost, duality_certificates,
                            exact_electrical, ssp_mincost)

from conftest import make_network, random_network


@st.composite
def tiny_instances(draw, uncapacitated=False):
    n = draw(st.integers(2, 4))
    m = draw(st.integers(1, 4))
    arcs = [tuple(draw(st.permutations(range(n)))[:2]) for _ in range(m)]
    cost = draw(st.lists(st.integers(-4, 6), min_size=m, max_size=m))
    cap = draw(st.lists(st.integers(0, 3), min_size=m, max_size=m))
    if uncapacitated:
        cap = [UNCAPACITATED if draw(st.booleans()) else u for u in cap]
    b = [0] * n
    for _ in range(draw(st.integers(0, 2))):
        v, w = draw(st.permutations(range(n)))[:2]
        b[v] -= 1
        b[w] += 1
    return ProblemInstance(n, [a for a, _ in arcs], [h for _, h in arcs], b, cost, cap)


def networkx_mincost(instance):
    """Independent route through networkx; finite capacities only."""
    g = nx.MultiDiGraph()
    for v, b in enumerate(instance.demand.tolist()):
        g.add_node(v, demand=b)
    for a in range(instance.arc_count):
        g.add_edge(int(instance.tail[a]), int(instance.head[a]),
                   weight=int(instance.cost[a]), capacity=int(instance.capacity[a]))
    try:
        return nx.network_simplex(g)[0]
    except nx.NetworkXUnfeasible:
        return None


def test_single_arc_examples(single_arc, single_arc_cost5):
    sol = ssp_mincost(single_arc_cost5)
    assert sol.status is Status.OPTIMAL and sol.objective == 5
    assert sol.flow.tolist() == [1]
    assert ssp_mincost(single_arc).objective == 2


def test_infeasible_and_unbounded():
    blocked = ProblemInstance(3, [0, 2], [1, 1], [-1, 0, 1], [1, 1], [2, 2])
    assert ssp_mincost(blocked).status is Status.INFEASIBLE
    cycle = ProblemInstance(2, [0, 1], [1, 0], [0, 0], [-1, 0], [UNCAPACITATED, UNCAPACITATED])
    assert ssp_mincost(cycle).status is Status.UNBOUNDED
    # a negative cycle does not help when demands cannot be met
    dead = ProblemInstance(3, [0, 1], [1, 0], [-1, 0, 1], [-1, 0], [UNCAPACITATED] * 2)
    assert ssp_mincost(dead).status is Status.INFEASIBLE


def test_limits():
    big = ProblemInstance(60, list(range(59)), list(range(1, 60)), [0] * 60, [1] * 59, [1] * 59)
    with pytest.raises(OracleLimitError):
        ssp_mincost(big)
    assert ssp_mincost(big, enforce_limits=False).objective == 0


@given(tiny_instances())
def test_ssp_matches_brute_force_and_networkx(inst):
    sol = ssp_mincost(inst)
    brute = brute_force_mincost(inst)
    assert sol.status is brute.status
    if sol.status is Status.OPTIMAL:
        assert sol.objective == brute.objective
        assert validate_solution(inst, sol) == []
    nx_value = networkx_mincost(inst)
    assert (nx_value is None) == (sol.status is Status.INFEASIBLE)
    if nx_value is not None:
        assert nx_value == sol.objective


@given(tiny_instances(uncapacitated=True))
def test_ssp_matches_brute_force_uncapacitated(inst):
    sol = ssp_mincost(inst)
    brute = brute_force_mincost(inst)
    assert sol.status is brute.status
    if sol.status is Status.OPTIMAL:
        assert sol.objective == brute.objective


def test_brute_force_state_limit():
    inst = ProblemInstance(2, [0] * 8, [1] * 8, [0, 0], [1] * 8, [9] * 8)
    with pytest.raises(OracleLimitError):
        brute_force_mincost(inst)


def test_electrical_triangle():
    net = ResistiveNetwork(3, np.array([0, 1, 0]), np.array([1, 2, 2]),
                           np.array([Fraction(1)] * 3, dtype=object),
                           np.array([Fraction(-1), Fraction(0), Fraction(1)], dtype=object))
    f, pi = exact_electrical(net)
    assert f.tolist() == [Fraction(1, 3), Fraction(1, 3), Fraction(2, 3)]
    assert pi.tolist() == [0, Fraction(1, 3), Fraction(2, 3)]


def test_electrical_tree_and_zero_sources():
    net = make_network(4, [(0, 1), (1, 2), (1, 3)], r=[1, 2, 3], chi=[-2, 0, 1, 1])
    f, pi = exact_electrical(net)
    assert np.allclose(f, tree_flow(net, build_spanning_tree(net)))
    assert np.allclose(f, [2, 1, 1])
    assert np.allclose(pi, [0, 2, 4, 5])
    quiet = make_network(3, [(0, 1), (1, 2)], chi=[0, 0, 0])
    f0, pi0 = exact_electrical(quiet)
    assert not f0.any() and not pi0.any()


@pytest.mark.parametrize("seed", range(5))
def test_electrical_residual_and_energy(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 12, 20)
    f, pi = exact_electrical(net)
    flow_residual = np.zeros(net.node_count)
    np.add.at(flow_residual, net.head, f)
    np.add.at(flow_residual, net.tail, -f)
    assert np.abs(flow_residual - net.sources).max() <= 1e-9 * np.abs(net.sources).sum()
    energy = float(np.sum(net.resistance * f * f))
    assert energy == pytest.approx(float(pi @ net.sources), rel=1e-9)


def test_electrical_disconnected():
    net = make_network(3, [(0, 1)], chi=[-1, 0, 1])
    with pytest.raises(ValueError):
        exact_electrical(net)


def test_certificates(single_arc):
    y = np.array([0, 2])
    s = adjoint_slacks(single_arc, y)
    good = duality_certificates(np.array([1]), y, s, single_arc)
    assert good.optimal and good.duality_gap == 0
    zero = duality_certificates(np.array([0]), y, s, single_arc)
    assert zero.primal_residual == 1 and not zero.optimal
    off = duality_certificates(np.array([1]), np.array([0, 1]), adjoint_slacks(single_arc, [0, 1]),
                               single_arc)
    assert off.duality_gap == 1 and off.complementarity_violations == 1
    wrong_s = duality_certificates(np.array([1]), y, s + 1, single_arc)
    assert wrong_s.dual_residual == 1
