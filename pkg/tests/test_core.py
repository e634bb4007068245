import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cprflow.core import (UNCAPACITATED, DimacsParseError, InstanceError, ProblemInstance,
                          Solution, Status, UnsupportedFeatureError, adjoint_slacks,
                          apply_incidence, format_solution, parse_dimacs, validate_solution,
                          weak_components, write_dimacs)
from cprflow.generators import generate


def test_parse_single_arc():
    inst = parse_dimacs("p min 2 1\nn 1 -1\nn 2 1\na 1 2 0 3 2\n")
    assert inst.node_count == 2 and inst.arc_count == 1
    assert inst.demand.tolist() == [-1, 1]
    assert inst.capacity.tolist() == [3] and inst.cost.tolist() == [2]


def test_parse_standard_sign_and_comments():
    inst = parse_dimacs("c hello\np min 2 1\nn 1 4\nn 2 -4\na 1 2 0 inf 1\n",
                        standard_sign=True)
    assert inst.demand.tolist() == [-4, 4]
    assert inst.capacity.tolist() == [UNCAPACITATED]


def test_parse_uncapacitated_tokens():
    text = "p min 2 3\na 1 2 0 -1 1\na 1 2 0 inf 1\na 2 1 0 0 1\n"
    assert parse_dimacs(text).capacity.tolist() == [UNCAPACITATED, UNCAPACITATED, 0]
    inst = parse_dimacs(text, zero_is_uncapacitated=True)
    assert inst.uncapacitated.all()


def test_parse_no_arcs_all_zero():
    inst = parse_dimacs(b"p min 3 0\n")
    assert inst.arc_count == 0 and inst.demand.tolist() == [0, 0, 0]


def test_parse_errors_name_the_line():
    with pytest.raises(DimacsParseError, match="line 2"):
        parse_dimacs("p min 2 1\na 1 2 0 3 x\n")
    with pytest.raises(UnsupportedFeatureError):
        parse_dimacs("p min 2 1\na 1 2 1 3 2\n")
    with pytest.raises(InstanceError, match="sum"):
        parse_dimacs("p min 2 1\nn 1 -1\na 1 2 0 3 2\n")
    with pytest.raises(DimacsParseError):
        parse_dimacs("p min 2 2\na 1 2 0 3 2\n")
    with pytest.raises(DimacsParseError):
        parse_dimacs("a 1 2 0 3 2\n")


def test_instance_validation():
    with pytest.raises(InstanceError, match="self-loop"):
        ProblemInstance(2, [0], [0], [0, 0], [1], [1])
    with pytest.raises(InstanceError):
        ProblemInstance(2, [0], [1], [1, 0], [1], [1])
    with pytest.raises(InstanceError, match="64 bits"):
        ProblemInstance(2, [0], [1], [0, 0], [2 ** 70], [1])
    inst = ProblemInstance(3, [0, 0], [1, 1], [0, 0, 0], [1, -4], [2, UNCAPACITATED])
    assert inst.stats.C == 4 and inst.stats.U == 2 and inst.stats.gamma == 4
    with pytest.raises(ValueError):
        inst.demand[0] = 5


def test_incidence_examples():
    one = ProblemInstance(2, [0], [1], [0, 0], [0], [1])
    assert apply_incidence(one, np.array([1.0])).tolist() == [-1, 1]
    tri = ProblemInstance(3, [0, 1, 2], [1, 2, 0], [0, 0, 0], [0] * 3, [1] * 3)
    assert apply_incidence(tri, np.array([1.0, 2.0, 3.0])).tolist() == [2, -1, -1]
    assert apply_incidence(tri, np.array([5.0, 5.0, 5.0])).tolist() == [0, 0, 0]
    with pytest.raises(ValueError):
        apply_incidence(tri, np.ones(2))


def test_slack_examples():
    one = ProblemInstance(2, [0], [1], [0, 0], [5], [1])
    assert adjoint_slacks(one, np.array([0, 5])).tolist() == [0]
    assert adjoint_slacks(one, np.zeros(2)).tolist() == [5]
    assert adjoint_slacks(one, np.array([0.2, 5.1]))[0] == pytest.approx(0.1)


@given(st.integers(0, 2 ** 32 - 1))
def test_adjointness(seed):
    rng = np.random.default_rng(seed)
    inst = generate("random-connected", int(rng.integers(2, 12)), 15, seed=seed % 1000)
    f = rng.normal(size=inst.arc_count)
    y = rng.normal(size=inst.node_count)
    lhs = y @ apply_incidence(inst, f) + (adjoint_slacks(inst, y) - inst.cost) @ f
    assert abs(lhs) <= 1e-9 * (1 + np.abs(y).sum() * np.abs(f).sum())


@given(st.sampled_from(["random-connected", "grid", "transshipment"]),
       st.integers(2, 15), st.integers(0, 10_000))
def test_dimacs_round_trip(family, n, seed):
    inst = generate(family, n, 2 * n, seed, uncapacitated=0.3)
    back = parse_dimacs(write_dimacs(inst, comment="round\ntrip"))
    for name in ("tail", "head", "demand", "cost", "capacity"):
        assert np.array_equal(getattr(back, name), getattr(inst, name))
    assert back.node_count == inst.node_count


def test_weak_components():
    inst = ProblemInstance(5, [0, 3], [1, 4], [0] * 5, [0, 0], [1, 1])
    count, labels = weak_components(inst)
    assert count == 3
    assert labels[0] == labels[1] and labels[3] == labels[4] and labels[2] not in labels[[0, 3]]


def test_validate_solution_catches_violations(single_arc):
    good = Solution(Status.OPTIMAL, 2, np.array([1]), np.array([0, 2]))
    assert validate_solution(single_arc, good) == []
    assert validate_solution(single_arc, Solution(Status.OPTIMAL, 2, np.array([1]),
                                                  np.array([0, 5])))
    assert validate_solution(single_arc, Solution(Status.OPTIMAL, 4, np.array([2]),
                                                  np.array([0, 2])))
    assert validate_solution(single_arc, Solution(Status.OPTIMAL, 1, np.array([1]),
                                                  np.array([0, 2])))
    # negative reduced cost is fine on a saturated arc
    sat = ProblemInstance(2, [0], [1], [-3, 3], [2], [3])
    assert validate_solution(sat, Solution(Status.OPTIMAL, 6, np.array([3]),
                                           np.array([0, 10]))) == []


def test_format_solution():
    sol = Solution(Status.OPTIMAL, 5, np.array([1]), np.array([0, 5]))
    assert format_solution(sol) == "s 5\nf 1 1\ny 1 0\ny 2 5\n"
    assert format_solution(Solution.infeasible()) == "s INFEASIBLE\n"
    assert format_solution(Solution.unbounded()) == "s UNBOUNDED\n"
