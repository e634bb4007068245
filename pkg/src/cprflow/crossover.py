"""Rounding a sub-unit duality gap to exact integral optimal potentials.

Nodes are settled one at a time, starting from node 0.  While the settled
set ``S`` has net supply (``b(S) < 0``) or no arc enters it, the cheapest
arc leaving ``S`` is made tight; otherwise the cheapest entering arc is.
The unsettled potentials are ``y0`` plus a common shift that is never
materialised, so each round costs a heap operation.  Settled potentials
are integers obtained as ``y_v +- c_a`` from a settled neighbour.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import SolverError

USE_OUT, USE_IN = "out", "in"
TIE_TOLERANCE = 1e-12


class CrossoverInfeasible(Exception):
    """The settled set has net supply and no leaving arc."""


@dataclass
class Settlement:
    """One round: arc ``arc`` became tight and settled ``node``."""
    k: int
    arc: int
    branch: str
    shift: Fraction     # the lazy shift Delta^k, exact
    node: int
    supply: int         # b(S^k) before the round


@dataclass
class CrossoverResult:
    potentials: np.ndarray
    objective: int
    history: list[Settlement] = field(default_factory=list)
    start: int = 0
    initial_shift: Fraction = Fraction(0)


@dataclass
class _Heap:
    """Binary heap of ``(key, arc, endpoint)`` with lazy deletion of settled endpoints."""
    items: list = field(default_factory=list)

    def push(self, key: float, arc: int, node: int):
        heapq.heappush(self.items, (key, arc, node))

    def purge(self, settled):
        while self.items and settled[self.items[0][2]]:
            heapq.heappop(self.items)

    def live(self, settled) -> bool:
        self.purge(settled)
        return bool(self.items)

    def pop_min(self, settled):
        """Live minimum; keys within ``TIE_TOLERANCE`` go to the smallest arc index."""
        self.purge(settled)
        best = heapq.heappop(self.items)
        held = []
        while self.items and self.items[0][0] <= best[0] + TIE_TOLERANCE:
            other = heapq.heappop(self.items)
            if settled[other[2]]:
                continue
            if other[1] < best[1]:
                held.append(best)
                best = other
            else:
                held.append(other)
        for item in held:
            heapq.heappush(self.items, item)
        return best


def select_branch(supply: int, incoming: _Heap, settled) -> str:
    """``USE_OUT`` iff ``b(S) < 0`` or no live arc enters ``S``."""
    if supply < 0 or not incoming.live(settled):
        return USE_OUT
    return USE_IN


def crossover(graph, y0, *, start: int = 0) -> CrossoverResult:
    """Integral potentials ``y`` with ``c_a + y_tail - y_head >= 0`` and ``y_start = 0``.

    ``graph`` needs ``node_count``, ``tail``, ``head``, ``cost`` (integers)
    and ``demand``.  When ``y0`` comes with a primal ``x`` of duality gap
    below one, ``b^T y`` is the optimal objective.
    """
    n = graph.node_count
    tail = graph.tail.tolist()
    head = graph.head.tolist()
    cost = [int(c) for c in graph.cost]
    demand = [int(b) for b in graph.demand]
    y0 = np.asarray(y0, dtype=float).tolist()
    out_arcs = [[] for _ in range(n)]
    in_arcs = [[] for _ in range(n)]
    for a in range(len(tail)):
        out_arcs[tail[a]].append(a)
        in_arcs[head[a]].append(a)

    settled = [False] * n
    y = [0] * n
    outgoing, incoming = _Heap(), _Heap()

    def settle(v: int, value: int):
        settled[v] = True
        y[v] = value
        for a in out_arcs[v]:
            w = head[a]
            if not settled[w]:
                outgoing.push(cost[a] + value - y0[w], a, w)
        for a in in_arcs[v]:
            w = tail[a]
            if not settled[w]:
                incoming.push(cost[a] + y0[w] - value, a, w)

    settle(start, 0)
    supply = demand[start]
    history = []
    for k in range(1, n):
        branch = select_branch(supply, incoming, settled)
        if branch == USE_OUT:
            if not outgoing.live(settled):
                if supply < 0:
                    raise CrossoverInfeasible("net supply with no leaving arc")
                raise SolverError("crossover ran out of arcs: graph is not connected")
            _, a, w = outgoing.pop_min(settled)
            value = y[tail[a]] + cost[a]
        else:
            _, a, w = incoming.pop_min(settled)
            value = y[head[a]] - cost[a]
        # float keys only order the heap; the shift itself is kept exact
        shift = value - Fraction(y0[w])
        history.append(Settlement(k, a, branch, shift, w, supply))
        settle(w, value)
        supply += demand[w]
    potentials = np.array(y, dtype=np.int64)
    objective = sum(b * v for b, v in zip(demand, y))
    return CrossoverResult(potentials, objective, history, start, -Fraction(y0[start]))


def expected_objective(graph, y0) -> int:
    """``ceil(b^T y0 - 1e-6)``, what a certified ``y0`` must round to."""
    value = float(np.dot(np.asarray(graph.demand, dtype=float), np.asarray(y0, dtype=float)))
    return math.ceil(value - 1e-6)


def materialize(graph, y0, result: CrossoverResult, k: int) -> np.ndarray:
    """Potentials ``y^k``: settled nodes as assigned, the rest ``y0 + Delta^{k-1}``.

    ``k`` runs from 1 (only the start node settled) to ``n``.  Entries are
    exact fractions.
    """
    shift = result.initial_shift if k == 1 else result.history[k - 2].shift
    yk = np.array([Fraction(float(v)) + shift for v in np.asarray(y0, dtype=float)], dtype=object)
    yk[result.start] = Fraction(0)
    for rec in result.history[: k - 1]:
        yk[rec.node] = Fraction(int(result.potentials[rec.node]))
    return yk
