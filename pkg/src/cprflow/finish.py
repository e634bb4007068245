"""From integral optimal potentials on the auxiliary network to a solution.

Arcs of zero reduced cost form the admissible network.  After dropping hat
arcs, any flow meeting the auxiliary demands on admissible gadget arcs is
optimal; it is found with one max-flow and read off the acute arcs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemInstance, Solution, SolverError, Status, adjoint_slacks, validate_solution
from .init import ACUTE, HAT, AuxiliaryNetwork
from .maxflow import Dinic
from .preprocess import ReductionTrace

_WIDE_LIMIT = 2 ** 127


@dataclass
class AdmissibleNetwork:
    """Zero-slack arcs of the auxiliary network, with and without hat arcs."""
    h1: np.ndarray          # auxiliary arc ids with slack 0
    h0: np.ndarray          # the non-hat ones among them
    slack: np.ndarray


def infeasibility_threshold(instance: ProblemInstance) -> int:
    st = instance.stats
    bound = instance.arc_count * st.C * st.U
    if bound >= _WIDE_LIMIT:
        raise ArithmeticError("m * C * U exceeds 128-bit range")
    return bound


def check_infeasible(objective: int, instance: ProblemInstance) -> bool:
    """True iff the auxiliary optimum ``b^T y`` exceeds ``m C U`` of ``instance``."""
    return int(objective) > infeasibility_threshold(instance)


def admissible_network(aux: AuxiliaryNetwork, y) -> AdmissibleNetwork:
    slack = adjoint_slacks(aux, np.asarray(y, dtype=np.int64))
    if np.any(slack < 0):
        raise SolverError("potentials are not dual feasible")
    h1 = np.flatnonzero(slack == 0)
    h0 = h1[aux.kind[h1] != HAT]
    return AdmissibleNetwork(h1, h0, slack)


def recover_flow(aux: AuxiliaryNetwork, admissible: AdmissibleNetwork) -> np.ndarray:
    """Integral flow on the original arcs, routed through admissible gadget arcs.

    Gadget arcs are uncapacitated; ``||b_1||_1`` stands in as their
    capacity.  Each original arc carries the flow of its acute arc, and
    conservation at the gadget node keeps it within capacity.
    """
    n1 = aux.node_count
    big = int(np.abs(aux.demand).sum())
    source, sink = n1, n1 + 1
    net = Dinic(n1 + 2)
    ids = {int(a): net.add_edge(int(aux.tail[a]), int(aux.head[a]), big) for a in admissible.h0}
    need = 0
    for v, b in enumerate(aux.demand.tolist()):
        if b < 0:
            net.add_edge(source, v, -b)
        elif b > 0:
            net.add_edge(v, sink, b)
            need += b
    if net.max_flow(source, sink) != need:
        raise SolverError("admissible network cannot carry the demands")
    m = aux.arc_count // 3
    x = np.zeros(m, dtype=np.int64)
    for a, eid in ids.items():
        if aux.kind[a] == ACUTE:
            x[aux.origin[a]] = net.flow_on(eid)
    return x


def undo_reductions(original: ProblemInstance, reduced: ProblemInstance, x, y,
                    trace: ReductionTrace) -> Solution:
    """Map ``(x, y)`` on the reduced instance back and validate the result."""
    reduced_objective = sum(int(c) * int(f) for c, f in zip(reduced.cost, x))
    flow = trace.undo_flow(x)
    potentials = trace.undo_potentials(y)
    objective = sum(int(c) * int(f) for c, f in zip(original.cost, flow))
    if objective != reduced_objective + trace.objective_offset:
        raise SolverError("objective offset of the reductions does not reconcile")
    sol = Solution(Status.OPTIMAL, objective, flow, potentials)
    problems = validate_solution(original, sol)
    if problems:
        raise SolverError("solution failed validation: " + "; ".join(problems[:3]))
    return sol
