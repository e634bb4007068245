import numpy as np
import pytest
from conftest import certified_point

from cprflow.core import ProblemInstance, SolverError, Status, adjoint_slacks
from cprflow.crossover import crossover
from cprflow.finish import (admissible_network, check_infeasible, infeasibility_threshold,
                            recover_flow, undo_reductions)
from cprflow.init import HAT, balance_arcs
from cprflow.oracle import ssp_mincost
from cprflow.preprocess import reduce_instance


def test_threshold_on_single_arc(single_arc):
    assert infeasibility_threshold(single_arc) == 6
    assert not check_infeasible(5, single_arc)
    assert not check_infeasible(6, single_arc)
    assert check_infeasible(7, single_arc)


def test_threshold_overflow_guard():
    big = ProblemInstance(2, [0] * 3, [1] * 3, [0, 0], [2 ** 63 - 1] * 3, [2 ** 63 - 1] * 3)
    with pytest.raises(ArithmeticError):
        infeasibility_threshold(big)


def test_unreachable_sink_is_detected():
    # node 2 needs one unit but has no entering arc
    inst = ProblemInstance(3, [0, 2], [1, 1], [-1, 0, 1], [1, 1], [3, 3])
    assert ssp_mincost(inst).status is Status.INFEASIBLE
    reduced, aux, res = certified_point(inst)
    rounded = crossover(aux, res.point.y)
    assert check_infeasible(rounded.objective, reduced)


def test_zero_demand_is_feasible_with_zero_flow():
    inst = ProblemInstance(3, [0, 1, 2], [1, 2, 0], [0, 0, 0], [1, 2, 3], [1, 1, 1])
    reduced, aux, res = certified_point(inst)
    rounded = crossover(aux, res.point.y)
    assert rounded.objective == 0 and not check_infeasible(0, reduced)
    x = recover_flow(aux, admissible_network(aux, rounded.potentials))
    assert x.tolist() == [0, 0, 0]


@pytest.mark.parametrize("cost", [2, 5])
def test_recover_flow_on_single_arc(cost):
    inst = ProblemInstance(2, [0], [1], [-1, 1], [cost], [3])
    aux, _ = balance_arcs(inst)
    # acute arc 0->2 and grave arc 1->2 tight; the hat arc is not
    y = np.array([0, cost, cost])
    adm = admissible_network(aux, y)
    assert adm.h1.tolist() == [0, 1] and adm.h0.tolist() == [0, 1]
    assert int(aux.demand @ y) == cost
    x = recover_flow(aux, adm)
    assert x.tolist() == [1]
    assert int(inst.cost @ x) == cost


def test_admissible_network_rejects_infeasible_potentials(single_arc):
    aux, _ = balance_arcs(single_arc)
    with pytest.raises(SolverError):
        admissible_network(aux, np.array([0, 0, 100]))


def test_admissible_arcs_exclude_hats():
    inst = ProblemInstance(4, [0, 1, 2, 0], [1, 2, 3, 3], [-2, 0, 0, 2], [1, 1, 1, 5],
                           [1, 3, 3, 3])
    reduced, aux, res = certified_point(inst)
    rounded = crossover(aux, res.point.y)
    adm = admissible_network(aux, rounded.potentials)
    assert np.all(adjoint_slacks(aux, rounded.potentials)[adm.h1] == 0)
    assert np.all(aux.kind[adm.h0] != HAT)
    x = recover_flow(aux, adm)
    assert int(reduced.cost @ x) == rounded.objective == ssp_mincost(inst).objective


def test_undo_reductions_cases():
    plain = ProblemInstance(2, [0], [1], [-1, 1], [3], [1])
    red = reduce_instance(plain)
    sol = undo_reductions(plain, red.instance, [1], [0, 3], red.trace)
    assert sol.flow.tolist() == [1] and sol.objective == 3
    flipped = ProblemInstance(2, [0], [1], [-3, 3], [-2], [3])
    red = reduce_instance(flipped)
    assert red.instance.cost.tolist() == [2]
    sol = undo_reductions(flipped, red.instance, [0], [0, 0], red.trace)
    assert sol.flow.tolist() == [3] and sol.objective == -6
    split = ProblemInstance(2, [0], [1], [-2, 2], [1], [2])
    red = reduce_instance(split)
    assert red.instance.arc_count == 2
    sol = undo_reductions(split, red.instance, [1, 1], [0, 1], red.trace)
    assert sol.flow.tolist() == [2] and sol.objective == 2
    with pytest.raises(SolverError):
        undo_reductions(split, red.instance, [1, 1], [0, -5], red.trace)
