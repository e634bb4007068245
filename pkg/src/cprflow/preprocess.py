"""Reductions to a finite instance with nonnegative costs and odd capacities.

Every transformation appends a record to a :class:`ReductionTrace`, which
maps a flow (and potentials) of the reduced instance back to the input.

The chain applied by :func:`reduce_instance` is::

    drop zero-capacity arcs -> unboundedness test -> shift potentials
    -> flip negative-cost arcs -> cap uncapacitated arcs -> split even arcs
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import UNCAPACITATED, ProblemInstance
from .maxflow import feasible_flow


@dataclass(frozen=True)
class DropArcs:
    kept: tuple[int, ...]
    original_arc_count: int


@dataclass(frozen=True)
class PotentialShift:
    shift: tuple[int, ...]
    cost_offset_contribution: int


@dataclass(frozen=True)
class NegCostFlip:
    arc: int
    original_capacity: int
    cost_offset_contribution: int


@dataclass(frozen=True)
class CapacityCap:
    arc: int
    original_infinite: bool
    capacity: int


@dataclass(frozen=True)
class ParallelSplit:
    arc: int
    new_arc: int


@dataclass
class ReductionTrace:
    records: list = field(default_factory=list)
    objective_offset: int = 0

    def extend(self, other: "ReductionTrace") -> None:
        self.records.extend(other.records)
        self.objective_offset += other.objective_offset

    def undo_flow(self, x) -> np.ndarray:
        """Map an integral flow on the reduced instance to the input instance."""
        x = [int(v) for v in x]
        for rec in reversed(self.records):
            if isinstance(rec, ParallelSplit):
                assert rec.new_arc == len(x) - 1
                x[rec.arc] += x.pop()
            elif isinstance(rec, NegCostFlip):
                x[rec.arc] = rec.original_capacity - x[rec.arc]
            elif isinstance(rec, DropArcs):
                full = [0] * rec.original_arc_count
                for i, a in enumerate(rec.kept):
                    full[a] = x[i]
                x = full
        return np.array(x, dtype=np.int64)

    def undo_potentials(self, y) -> np.ndarray:
        y = np.array([int(v) for v in y], dtype=object)
        for rec in reversed(self.records):
            if isinstance(rec, PotentialShift):
                y = y + np.array(rec.shift, dtype=object)
        return y.astype(np.int64)

    def to_json(self) -> str:
        return json.dumps({
            "objective_offset": self.objective_offset,
            "records": [{"kind": type(r).__name__, **asdict(r)} for r in self.records],
        }, indent=1)


def drop_zero_capacity(instance: ProblemInstance) -> tuple[ProblemInstance, ReductionTrace]:
    trace = ReductionTrace()
    keep = np.flatnonzero(instance.capacity != 0)
    if len(keep) == instance.arc_count:
        return instance, trace
    trace.records.append(DropArcs(tuple(keep.tolist()), instance.arc_count))
    reduced = instance.replace(tail=instance.tail[keep], head=instance.head[keep],
                               cost=instance.cost[keep], capacity=instance.capacity[keep])
    return reduced, trace


def _bellman_ford_all(n: int, tail, head, cost) -> tuple[list[int], bool]:
    """Distances from a virtual source joined to every node by a 0-arc.

    Returns ``(dist, has_negative_cycle)``.
    """
    dist = [0] * n
    arcs = list(zip(tail.tolist(), head.tolist(), cost.tolist()))
    for _ in range(n):
        changed = False
        for v, w, c in arcs:
            if dist[v] + c < dist[w]:
                dist[w] = dist[v] + c
                changed = True
        if not changed:
            return dist, False
    return dist, True


def detect_unbounded(instance: ProblemInstance) -> bool:
    """True iff the uncapacitated arcs contain a negative-cost directed cycle."""
    inf = instance.uncapacitated
    if not inf.any():
        return False
    _, negative = _bellman_ford_all(instance.node_count, instance.tail[inf],
                                    instance.head[inf], instance.cost[inf])
    return negative


def is_feasible(instance: ProblemInstance) -> bool:
    """Feasibility by max-flow; uncapacitated arcs get capacity ``||b||_1``."""
    cap = np.where(instance.uncapacitated, instance.stats.b_one_norm, instance.capacity)
    return feasible_flow(instance.node_count, instance.tail, instance.head, cap,
                         instance.demand) is not None


def shift_potentials(instance: ProblemInstance) -> tuple[ProblemInstance, ReductionTrace]:
    """Make uncapacitated arc costs nonnegative by a potential transformation.

    Uses shortest-path distances ``d`` over the uncapacitated arcs; new costs
    are ``c_a + d_v - d_w`` and the objective changes by ``d^T b``.
    Requires :func:`detect_unbounded` to be false.
    """
    trace = ReductionTrace()
    inf = instance.uncapacitated
    if not np.any(inf & (instance.cost < 0)):
        return instance, trace
    d, negative = _bellman_ford_all(instance.node_count, instance.tail[inf],
                                    instance.head[inf], instance.cost[inf])
    if negative:
        raise ValueError("uncapacitated arcs contain a negative cycle")
    offset = sum(dv * int(b) for dv, b in zip(d, instance.demand))
    trace.records.append(PotentialShift(tuple(d), offset))
    trace.objective_offset += offset
    d = np.array(d, dtype=np.int64)
    cost = instance.cost + d[instance.tail] - d[instance.head]
    return instance.replace(cost=cost), trace


def eliminate_negative_costs(instance: ProblemInstance) -> tuple[ProblemInstance, ReductionTrace]:
    """Saturate and reverse every negative-cost arc (all must be capacitated)."""
    trace = ReductionTrace()
    neg = np.flatnonzero(instance.cost < 0)
    if not len(neg):
        return instance, trace
    if np.any(instance.uncapacitated[neg]):
        raise ValueError("negative-cost arcs must have finite capacity")
    tail, head = instance.tail.copy(), instance.head.copy()
    cost = instance.cost.copy()
    demand = [int(b) for b in instance.demand]
    for a in neg.tolist():
        v, w, c, u = int(tail[a]), int(head[a]), int(cost[a]), int(instance.capacity[a])
        tail[a], head[a], cost[a] = w, v, -c
        demand[v] += u
        demand[w] -= u
        trace.records.append(NegCostFlip(a, u, c * u))
        trace.objective_offset += c * u
    return instance.replace(tail=tail, head=head, cost=cost, demand=demand), trace


def finitize_capacities(instance: ProblemInstance) -> tuple[ProblemInstance, ReductionTrace]:
    """Cap uncapacitated arcs at ``||b||_1 / 2 + 1``.

    With nonnegative costs some optimal flow is acyclic, so no arc carries
    more than ``||b||_1 / 2``; the extra unit keeps every capped arc strictly
    below its cap in that optimum, so optimal potentials never price a capped
    arc negatively.  Expects nonnegative costs on uncapacitated arcs.
    """
    trace = ReductionTrace()
    inf = np.flatnonzero(instance.uncapacitated)
    if not len(inf):
        return instance, trace
    bound = instance.stats.b_one_norm // 2 + 1
    capacity = instance.capacity.copy()
    capacity[inf] = bound
    for a in inf.tolist():
        trace.records.append(CapacityCap(a, True, bound))
    return instance.replace(capacity=capacity), trace


def make_capacities_odd(instance: ProblemInstance) -> tuple[ProblemInstance, ReductionTrace]:
    """Split each even-capacity arc into capacities ``u - 1`` and ``1``."""
    trace = ReductionTrace()
    cap = instance.capacity
    even = np.flatnonzero((cap > 0) & (cap % 2 == 0))
    if not len(even):
        return instance, trace
    m = instance.arc_count
    capacity = cap.copy()
    capacity[even] -= 1
    for i, a in enumerate(even.tolist()):
        trace.records.append(ParallelSplit(a, m + i))
    return instance.replace(
        tail=np.concatenate([instance.tail, instance.tail[even]]),
        head=np.concatenate([instance.head, instance.head[even]]),
        cost=np.concatenate([instance.cost, instance.cost[even]]),
        capacity=np.concatenate([capacity, np.ones(len(even), dtype=np.int64)]),
    ), trace


@dataclass
class Reduction:
    """Outcome of :func:`reduce_instance`.

    ``status`` is ``None`` when the reduced instance still has to be solved,
    otherwise ``"unbounded"`` or ``"infeasible"``.
    """
    instance: ProblemInstance
    trace: ReductionTrace
    status: str | None = None


def reduce_instance(instance: ProblemInstance) -> Reduction:
    trace = ReductionTrace()
    current, step = drop_zero_capacity(instance)
    trace.extend(step)
    if detect_unbounded(current):
        status = "unbounded" if is_feasible(current) else "infeasible"
        return Reduction(current, trace, status)
    for transform in (shift_potentials, eliminate_negative_costs,
                      finitize_capacities, make_capacities_odd):
        current, step = transform(current)
        trace.extend(step)
    return Reduction(current, trace)


__all__ = [
    "CapacityCap", "DropArcs", "NegCostFlip", "ParallelSplit", "PotentialShift",
    "Reduction", "ReductionTrace", "detect_unbounded", "drop_zero_capacity",
    "eliminate_negative_costs", "finitize_capacities", "is_feasible",
    "make_capacities_odd", "reduce_instance", "shift_potentials", "UNCAPACITATED",
]
