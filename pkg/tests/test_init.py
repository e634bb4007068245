import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cprflow.core import UNCAPACITATED, ProblemInstance, Status, apply_incidence, adjoint_slacks
from cprflow.generators import suite_instance
from cprflow.init import (ACUTE, GRAVE, HAT, balance_arcs, initial_potential,
                          initial_potential_bound, potential_parameters, tree_solution)
from cprflow.ipm import potential
from cprflow.oracle import ssp_mincost
from cprflow.preprocess import reduce_instance


def test_tree_solution_examples(single_arc):
    assert tree_solution(single_arc).tolist() == [1]
    path = ProblemInstance(3, [0, 1], [1, 2], [-2, 0, 2], [1, 1], [1, 1])
    assert tree_solution(path).tolist() == [2, 2]
    # star centred at 0, arcs alternate direction
    star = ProblemInstance(4, [0, 2, 0], [1, 0, 3], [0, 3, -5, 2], [1] * 3, [1] * 3)
    z = tree_solution(star)
    assert z.tolist() == [3, 5, 2]
    assert apply_incidence(star, z).tolist() == star.demand.tolist()


def test_tree_solution_needs_connectivity():
    with pytest.raises(ValueError):
        tree_solution(ProblemInstance(3, [0], [1], [0, 0, 0], [1], [1]))


def test_balance_arcs_worked_example(single_arc):
    aux, pt = balance_arcs(single_arc)
    assert pt.gamma == 3 and pt.t == 27
    assert aux.kind.tolist() == [ACUTE, GRAVE, HAT]
    assert (aux.tail.tolist(), aux.head.tolist()) == ([0, 1, 1], [2, 2, 0])
    assert pt.x.tolist() == [Fraction(3, 2), Fraction(3, 2), Fraction(1, 2)]
    assert aux.cost.tolist() == [2, 0, 54]
    assert pt.y.tolist() == [0, 0, -18]
    assert (pt.x * pt.s).tolist() == [30, 27, 27]
    assert aux.demand.tolist() == [-1, -2, 3]
    assert apply_incidence(aux, pt.x).tolist() == [-1, -2, 3]
    assert (pt.p, pt.q) == (2, 5)


def test_initial_potential_of_example(single_arc):
    aux, pt = balance_arcs(single_arc)
    bound = initial_potential_bound(aux, pt)
    assert bound == pytest.approx(5 / 3 + 2 * math.log(9 * 27))
    assert bound == pytest.approx(12.65, abs=0.01)
    p0 = initial_potential(aux, pt)
    assert p0 <= bound
    assert p0 >= pt.p * math.log(float(pt.duality_gap))


def test_potential_when_all_products_equal():
    m1, t = 12, 50.0
    p, q = potential_parameters(m1)
    x = np.full(m1, 5.0)
    s = np.full(m1, t / 5.0)
    assert potential(x, s, q) == pytest.approx(p * math.log(m1 * t))


def test_potential_parameters():
    assert potential_parameters(3) == (2, 5)
    assert potential_parameters(4) == (2, 6)
    assert potential_parameters(9) == (3, 12)
    assert potential_parameters(10) == (4, 14)


def test_balance_arcs_rejects_bad_input():
    with pytest.raises(ValueError, match="odd"):
        balance_arcs(ProblemInstance(2, [0], [1], [0, 0], [1], [2]))
    with pytest.raises(ValueError, match="nonnegative"):
        balance_arcs(ProblemInstance(2, [0], [1], [0, 0], [-1], [3]))


def _reduced(index):
    red = reduce_instance(suite_instance(index, seed=5))
    if red.status is not None or red.instance.arc_count == 0:
        return None
    inst = red.instance
    from cprflow.core import weak_components
    if weak_components(inst)[0] != 1:
        return None
    return inst


@given(st.integers(0, 300))
def test_window_and_hat_costs(index):
    inst = _reduced(index)
    if inst is None:
        return
    aux, pt = balance_arcs(inst)
    prod = pt.x * pt.s
    assert all(pt.t <= v <= pt.t + pt.gamma ** 2 for v in prod)
    assert np.all(pt.x > 0) and np.all(pt.s > 0)
    assert np.array_equal(apply_incidence(aux, pt.x), aux.demand)
    assert np.array_equal(adjoint_slacks(aux, pt.y), pt.s)
    st_ = inst.stats
    assert np.all(aux.cost[aux.kind == HAT] > inst.arc_count * st_.C * st_.U)
    assert aux.arc_count == 3 * inst.arc_count
    assert aux.node_count == inst.node_count + inst.arc_count
    assert initial_potential(aux, pt) <= initial_potential_bound(aux, pt) + 1e-9


@given(st.integers(0, 300))
def test_auxiliary_optimum_matches_original(index):
    inst = _reduced(index)
    if inst is None or inst.node_count > 15:
        return
    aux, _ = balance_arcs(inst)
    g1 = ProblemInstance(aux.node_count, aux.tail, aux.head, aux.demand, aux.cost,
                         [UNCAPACITATED] * aux.arc_count)
    ref = ssp_mincost(inst)
    got = ssp_mincost(g1, enforce_limits=False)
    if ref.status is Status.OPTIMAL:
        assert got.objective == ref.objective
