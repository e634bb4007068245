"""Problem model, DIMACS I/O and incidence-operator primitives.

Arcs are stored as parallel ``tail``/``head`` index arrays.  The node-arc
incidence matrix is never materialised; :func:`apply_incidence` and
:func:`adjoint_slacks` apply it (and its transpose) directly.

Sign conventions used throughout the package:

* ``demand[v] = inflow(v) - outflow(v)``, so supply nodes carry negative demand;
* the reduced cost (slack) of arc ``a = (v, w)`` under potentials ``y`` is
  ``c_a + y_v - y_w``.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

#: Capacity value marking an uncapacitated arc.
UNCAPACITATED = -1

_INT64_MAX = np.iinfo(np.int64).max
_INT64_MIN = np.iinfo(np.int64).min


class InstanceError(ValueError):
    """An instance violates the model's invariants."""


class DimacsParseError(InstanceError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnsupportedFeatureError(InstanceError):
    pass


class SolverError(RuntimeError):
    """Internal failure of a solver stage."""


class NumericAlarm(SolverError):
    """Floating point drift exceeded a safety threshold."""


def _frozen_int_array(values, name: str) -> np.ndarray:
    out = []
    for v in values:
        iv = int(v)
        if iv != v:
            raise InstanceError(f"{name} must be integral, got {v!r}")
        if not _INT64_MIN <= iv <= _INT64_MAX:
            raise InstanceError(f"{name} value {iv} does not fit in 64 bits")
        out.append(iv)
    arr = np.array(out, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Directed multigraph with integral demands, costs and capacities.

    ``capacity[a] == UNCAPACITATED`` marks an arc without upper bound.
    """

    node_count: int
    tail: np.ndarray
    head: np.ndarray
    demand: np.ndarray
    cost: np.ndarray
    capacity: np.ndarray

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise InstanceError("an instance needs at least one node")
        object.__setattr__(self, "node_count", n)
        for name in ("tail", "head", "demand", "cost", "capacity"):
            object.__setattr__(self, name, _frozen_int_array(getattr(self, name), name))
        m = len(self.tail)
        if not (len(self.head) == len(self.cost) == len(self.capacity) == m):
            raise InstanceError("arc arrays must have equal length")
        if len(self.demand) != n:
            raise InstanceError("demand must have one entry per node")
        if m:
            if self.tail.min() < 0 or self.head.min() < 0 or max(self.tail.max(), self.head.max()) >= n:
                raise InstanceError("arc endpoint out of range")
            if np.any(self.tail == self.head):
                bad = int(np.flatnonzero(self.tail == self.head)[0])
                raise InstanceError(f"arc {bad} is a self-loop")
            if np.any(self.capacity < UNCAPACITATED):
                raise InstanceError("capacities must be nonnegative or UNCAPACITATED")
        if sum(int(d) for d in self.demand) != 0:
            raise InstanceError("demands must sum to zero")

    @classmethod
    def from_arcs(cls, node_count: int, arcs: Iterable[tuple[int, int, int, int]],
                  demand: Sequence[int]) -> "ProblemInstance":
        """Build from ``(tail, head, cost, capacity)`` tuples; capacity ``None`` means uncapacitated."""
        arcs = list(arcs)
        return cls(
            node_count=node_count,
            tail=[a[0] for a in arcs],
            head=[a[1] for a in arcs],
            demand=list(demand),
            cost=[a[2] for a in arcs],
            capacity=[UNCAPACITATED if a[3] is None else a[3] for a in arcs],
        )

    @property
    def arc_count(self) -> int:
        return len(self.tail)

    @property
    def uncapacitated(self) -> np.ndarray:
        return self.capacity == UNCAPACITATED

    def replace(self, **changes) -> "ProblemInstance":
        fields_ = dict(node_count=self.node_count, tail=self.tail, head=self.head,
                       demand=self.demand, cost=self.cost, capacity=self.capacity)
        fields_.update(changes)
        return ProblemInstance(**fields_)

    @cached_property
    def stats(self) -> "InstanceStats":
        return InstanceStats.of(self)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR incidence lists: ``arcs[indptr[v]:indptr[v+1]]`` are the arcs touching ``v``."""
        m = self.arc_count
        ends = np.concatenate([self.tail, self.head])
        order = np.argsort(ends, kind="stable")
        arcs = (order % m) if m else order
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.add.at(indptr, ends + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, arcs.astype(np.int64)


@dataclass(frozen=True)
class InstanceStats:
    C: int
    U: int
    gamma: int
    b_one_norm: int

    @classmethod
    def of(cls, instance: ProblemInstance) -> "InstanceStats":
        C = int(np.abs(instance.cost).max()) if instance.arc_count else 0
        finite = instance.capacity[~instance.uncapacitated]
        U = int(finite.max()) if len(finite) else 0
        b1 = sum(abs(int(v)) for v in instance.demand)
        return cls(C=C, U=U, gamma=max(C, U), b_one_norm=b1)


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class Solution:
    status: Status
    objective: int | None = None
    flow: np.ndarray | None = None
    potentials: np.ndarray | None = None
    info: dict = field(default_factory=dict, compare=False)

    @classmethod
    def infeasible(cls, **info) -> "Solution":
        return cls(Status.INFEASIBLE, info=info)

    @classmethod
    def unbounded(cls, **info) -> "Solution":
        return cls(Status.UNBOUNDED, info=info)


# --------------------------------------------------------------------------
# incidence operators


def apply_incidence(graph, flow) -> np.ndarray:
    """Return ``A f``: inflow minus outflow at every node.

    ``graph`` is anything with ``node_count``, ``tail`` and ``head``.  Float
    inputs use a vectorised path; object arrays (e.g. ``Fraction``) are summed
    exactly.
    """
    flow = np.asarray(flow)
    if flow.shape != (len(graph.tail),):
        raise ValueError(f"flow has shape {flow.shape}, expected ({len(graph.tail)},)")
    n = graph.node_count
    if flow.dtype.kind == "f":
        return (np.bincount(graph.head, weights=flow, minlength=n)
                - np.bincount(graph.tail, weights=flow, minlength=n))
    out = np.zeros(n, dtype=flow.dtype)
    np.add.at(out, graph.head, flow)
    np.subtract.at(out, graph.tail, flow)
    return out


def adjoint_slacks(graph, potentials, cost=None) -> np.ndarray:
    """Return ``s = c - A^T y``, i.e. ``c_a + y_tail - y_head`` per arc."""
    y = np.asarray(potentials)
    if y.shape != (graph.node_count,):
        raise ValueError(f"potentials have shape {y.shape}, expected ({graph.node_count},)")
    c = graph.cost if cost is None else cost
    if y.dtype == object:
        c = np.asarray(c).astype(object)
    return c + y[graph.tail] - y[graph.head]


def weak_components(graph) -> tuple[int, np.ndarray]:
    """Label weakly connected components; returns ``(count, label per node)``."""
    parent = list(range(graph.node_count))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for v, w in zip(graph.tail.tolist(), graph.head.tolist()):
        rv, rw = find(v), find(w)
        if rv != rw:
            parent[rv] = rw
    roots = {}
    labels = np.empty(graph.node_count, dtype=np.int64)
    for v in range(graph.node_count):
        labels[v] = roots.setdefault(find(v), len(roots))
    return len(roots), labels


# --------------------------------------------------------------------------
# solution checking


def validate_solution(instance: ProblemInstance, solution: Solution) -> list[str]:
    """Return a list of violated optimality conditions (empty when valid).

    For an optimal solution this checks capacity bounds, conservation, the
    reported objective, and complementary slackness of the capacitated
    problem: an arc with positive reduced cost carries no flow, an arc with
    negative reduced cost is saturated (and so must be capacitated).
    """
    if solution.status is not Status.OPTIMAL:
        return []
    problems = []
    x = np.asarray(solution.flow, dtype=np.int64)
    y = np.asarray(solution.potentials, dtype=np.int64)
    if x.shape != (instance.arc_count,):
        return [f"flow has {len(x)} entries, expected {instance.arc_count}"]
    if y.shape != (instance.node_count,):
        return [f"potentials have {len(y)} entries, expected {instance.node_count}"]
    cap = instance.capacity
    finite = ~instance.uncapacitated
    for a in np.flatnonzero(x < 0):
        problems.append(f"arc {a}: negative flow {x[a]}")
    for a in np.flatnonzero(finite & (x > cap)):
        problems.append(f"arc {a}: flow {x[a]} exceeds capacity {cap[a]}")
    excess = apply_incidence(instance, x) - instance.demand
    for v in np.flatnonzero(excess):
        problems.append(f"node {v}: conservation off by {excess[v]}")
    objective = sum(int(c) * int(f) for c, f in zip(instance.cost, x))
    if solution.objective != objective:
        problems.append(f"objective {solution.objective} != c^T x = {objective}")
    s = adjoint_slacks(instance, y)
    for a in np.flatnonzero((s > 0) & (x != 0)):
        problems.append(f"arc {a}: reduced cost {s[a]} > 0 but flow {x[a]}")
    for a in np.flatnonzero(s < 0):
        if not finite[a]:
            problems.append(f"arc {a}: uncapacitated with reduced cost {s[a]} < 0")
        elif x[a] != cap[a]:
            problems.append(f"arc {a}: reduced cost {s[a]} < 0 but flow {x[a]} < {cap[a]}")
    return problems


# --------------------------------------------------------------------------
# DIMACS


def parse_dimacs(text, *, zero_is_uncapacitated: bool = False,
                 standard_sign: bool = False) -> ProblemInstance:
    """Parse a DIMACS ``min`` problem.

    Node values are read as demands ``b_v`` (negative for supply nodes);
    pass ``standard_sign=True`` for files that list supplies as positive.
    Capacity tokens ``inf`` and ``-1`` denote uncapacitated arcs, as does
    ``0`` when ``zero_is_uncapacitated`` is set.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode()
    if not isinstance(text, str):
        text = text.read()
        if isinstance(text, bytes):
            text = text.decode()
    n = m = None
    demand: dict[int, int] = {}
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        fields_ = raw.split()
        if not fields_ or fields_[0] == "c":
            continue
        kind = fields_[0]
        try:
            if kind == "p":
                if n is not None:
                    raise DimacsParseError(lineno, "duplicate problem line")
                if len(fields_) != 4 or fields_[1] != "min":
                    raise DimacsParseError(lineno, "expected 'p min <nodes> <arcs>'")
                n, m = int(fields_[2]), int(fields_[3])
            elif kind == "n":
                if len(fields_) != 3:
                    raise DimacsParseError(lineno, "expected 'n <id> <value>'")
                v, val = int(fields_[1]), int(fields_[2])
                demand[v] = demand.get(v, 0) + (-val if standard_sign else val)
            elif kind == "a":
                if len(fields_) != 6:
                    raise DimacsParseError(lineno, "expected 'a <src> <dst> <low> <cap> <cost>'")
                src, dst, low = int(fields_[1]), int(fields_[2]), int(fields_[3])
                cap_tok = fields_[4].lower()
                cost = int(fields_[5])
                if low != 0:
                    raise UnsupportedFeatureError(f"line {lineno}: nonzero lower bound {low}")
                if cap_tok in ("inf", "-1") or (cap_tok == "0" and zero_is_uncapacitated):
                    cap = UNCAPACITATED
                else:
                    cap = int(cap_tok)
                    if cap < 0:
                        raise DimacsParseError(lineno, f"negative capacity {cap}")
                arcs.append((src, dst, cost, cap, lineno))
            else:
                raise DimacsParseError(lineno, f"unknown line type {kind!r}")
        except ValueError as exc:
            if isinstance(exc, InstanceError):
                raise
            raise DimacsParseError(lineno, f"malformed line {raw.strip()!r}") from None
    if n is None:
        raise DimacsParseError(0, "missing problem line")
    if len(arcs) != m:
        raise DimacsParseError(0, f"problem line announces {m} arcs, found {len(arcs)}")
    for src, dst, _, _, lineno in arcs:
        if not (1 <= src <= n and 1 <= dst <= n):
            raise DimacsParseError(lineno, "arc endpoint out of range")
        if src == dst:
            raise DimacsParseError(lineno, "self-loop")
    for v in demand:
        if not 1 <= v <= n:
            raise DimacsParseError(0, f"node {v} out of range")
    b = [demand.get(v, 0) for v in range(1, n + 1)]
    if sum(b) != 0:
        raise InstanceError(f"demands sum to {sum(b)}, expected 0")
    return ProblemInstance(
        node_count=n,
        tail=[a[0] - 1 for a in arcs],
        head=[a[1] - 1 for a in arcs],
        demand=b,
        cost=[a[2] for a in arcs],
        capacity=[a[3] for a in arcs],
    )


def write_dimacs(instance: ProblemInstance, comment: str | None = None) -> str:
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"c {line}\n")
    out.write(f"p min {instance.node_count} {instance.arc_count}\n")
    for v, b in enumerate(instance.demand.tolist(), 1):
        if b:
            out.write(f"n {v} {b}\n")
    for t, h, c, u in zip(instance.tail.tolist(), instance.head.tolist(),
                          instance.cost.tolist(), instance.capacity.tolist()):
        cap = "inf" if u == UNCAPACITATED else str(u)
        out.write(f"a {t + 1} {h + 1} 0 {cap} {c}\n")
    return out.getvalue()


def format_solution(solution: Solution) -> str:
    if solution.status is Status.INFEASIBLE:
        return "s INFEASIBLE\n"
    if solution.status is Status.UNBOUNDED:
        return "s UNBOUNDED\n"
    lines = [f"s {solution.objective}"]
    lines += [f"f {a} {int(x)}" for a, x in enumerate(solution.flow, 1)]
    lines += [f"y {v} {int(p)}" for v, p in enumerate(solution.potentials, 1)]
    return "\n".join(lines) + "\n"
