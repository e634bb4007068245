"""Auxiliary uncapacitated network and interior starting points.

Each arc ``a = (v, w)`` of the input becomes a gadget node ``vw`` with three
arcs: *acute* ``v -> vw`` (cost ``c_a``), *grave* ``w -> vw`` (cost 0) and a
*hat* arc between ``v`` and ``w`` whose direction and (large) cost balance the
initial complementarity products.  Node ``vw`` demands ``u_a`` and ``w``'s
demand drops by ``u_a``.

Layout: original nodes keep their indices, gadget node of arc ``a`` is
``n + a``; arcs ``3a``, ``3a + 1``, ``3a + 2`` are acute, grave and hat.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ProblemInstance, SolverError, adjoint_slacks, apply_incidence

ACUTE, GRAVE, HAT = 0, 1, 2

# beyond this, integral costs lose exactness as doubles
_FLOAT_EXACT = 2 ** 53
_WIDE_LIMIT = 2 ** 127


@dataclass(frozen=True, eq=False)
class AuxiliaryNetwork:
    node_count: int
    base_node_count: int
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    demand: np.ndarray
    kind: np.ndarray
    origin: np.ndarray

    @property
    def arc_count(self) -> int:
        return len(self.tail)


@dataclass
class InteriorPoint:
    """Primal/dual pair on the auxiliary network.

    Arrays are ``float64`` in the working representation, or ``object``
    arrays of :class:`~fractions.Fraction` when built exactly.
    """
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    p: int
    q: int
    t: int
    gamma: int

    @property
    def exact(self) -> bool:
        return self.x.dtype == object

    def to_float(self) -> "InteriorPoint":
        return InteriorPoint(self.x.astype(float), self.y.astype(float), self.s.astype(float),
                             self.p, self.q, self.t, self.gamma)

    @property
    def duality_gap(self):
        return (self.x * self.s).sum()


def potential_parameters(arc_count: int) -> tuple[int, int]:
    """``p = min{k : k^2 >= m}`` and ``q = m + p`` for ``m`` auxiliary arcs."""
    p = math.isqrt(arc_count - 1) + 1 if arc_count > 1 else 1
    return p, arc_count + p


def balance_gamma(instance: ProblemInstance) -> int:
    st = instance.stats
    return max(st.C, st.U, (st.b_one_norm + 1) // 2)


def tree_solution(instance: ProblemInstance) -> np.ndarray:
    """Integral flow on a BFS spanning tree (rooted at node 0) meeting all demands.

    Capacities and signs are ignored; non-tree arcs carry zero.
    """
    n = instance.node_count
    indptr, arcs = instance.adjacency
    tail, head = instance.tail.tolist(), instance.head.tolist()
    parent_arc = [-1] * n
    seen = [False] * n
    seen[0] = True
    order = [0]
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for a in arcs[indptr[v]:indptr[v + 1]].tolist():
            w = head[a] if tail[a] == v else tail[a]
            if not seen[w]:
                seen[w] = True
                parent_arc[w] = a
                order.append(w)
                queue.append(w)
    if len(order) != n:
        raise ValueError("instance is not weakly connected")
    z = [0] * instance.arc_count
    subtree = [int(b) for b in instance.demand]
    for v in reversed(order[1:]):
        a = parent_arc[v]
        # the subtree's net demand enters through the parent arc
        if head[a] == v:
            z[a] = subtree[v]
            subtree[tail[a]] += subtree[v]
        else:
            z[a] = -subtree[v]
            subtree[head[a]] += subtree[v]
    return np.array(z, dtype=np.int64)


def balance_arcs(instance: ProblemInstance, z=None, t: int | None = None
                 ) -> tuple[AuxiliaryNetwork, InteriorPoint]:
    """Build the auxiliary network and an exact interior point.

    Requires odd positive capacities and nonnegative costs.  By default
    ``t = k * m * Gamma^3`` with the smallest ``k in {1, 2}`` for which every
    hat cost exceeds ``m * C * U``; this keeps hat arcs out of every optimum
    of a feasible instance.
    """
    n, m = instance.node_count, instance.arc_count
    if m == 0:
        raise ValueError("balance_arcs needs at least one arc")
    cap = [int(u) for u in instance.capacity]
    cost = [int(c) for c in instance.cost]
    if any(u <= 0 or u % 2 == 0 for u in cap):
        raise ValueError("capacities must be odd and positive")
    if any(c < 0 for c in cost):
        raise ValueError("costs must be nonnegative")
    if z is None:
        z = tree_solution(instance)
    z = [int(v) for v in z]
    gamma = balance_gamma(instance)
    st = instance.stats
    dev = [abs(Fraction(2 * za - u, 2)) for za, u in zip(z, cap)]
    mcu = m * st.C * st.U
    if t is None:
        for factor in (1, 2):
            t = factor * m * gamma ** 3
            if min(math.ceil(t / d) for d in dev) > mcu:
                break
    if t >= _WIDE_LIMIT:
        raise ArithmeticError("instance too large for 128-bit intermediates")

    n1, m1 = n + m, 3 * m
    tail = [0] * m1
    head = [0] * m1
    c1 = [0] * m1
    kind = [ACUTE, GRAVE, HAT] * m
    origin = np.repeat(np.arange(m), 3)
    b1 = [int(b) for b in instance.demand] + cap
    x = [Fraction(0)] * m1
    y = [Fraction(0)] * n1
    for a in range(m):
        v, w, u = int(instance.tail[a]), int(instance.head[a]), cap[a]
        vw = n + a
        tail[3 * a], head[3 * a], c1[3 * a] = v, vw, cost[a]
        tail[3 * a + 1], head[3 * a + 1] = w, vw
        if z[a] * 2 > u:
            tail[3 * a + 2], head[3 * a + 2] = v, w
        else:
            tail[3 * a + 2], head[3 * a + 2] = w, v
        c1[3 * a + 2] = math.ceil(Fraction(t) / dev[a])
        x[3 * a] = x[3 * a + 1] = Fraction(u, 2)
        x[3 * a + 2] = dev[a]
        y[vw] = Fraction(-2 * t, u)
        b1[w] -= u
    if max(c1) >= _FLOAT_EXACT:
        raise ArithmeticError("auxiliary costs exceed the exactly representable double range")

    aux = AuxiliaryNetwork(
        node_count=n1, base_node_count=n,
        tail=np.array(tail, dtype=np.int64), head=np.array(head, dtype=np.int64),
        cost=np.array(c1, dtype=np.int64), demand=np.array(b1, dtype=np.int64),
        kind=np.array(kind, dtype=np.int8), origin=origin,
    )
    xa = np.array(x, dtype=object)
    ya = np.array(y, dtype=object)
    sa = adjoint_slacks(aux, ya)
    if np.any(apply_incidence(aux, xa) != aux.demand) or np.any(sa <= 0) or np.any(xa <= 0):
        raise SolverError("balance_arcs produced a non-interior point")
    p, q = potential_parameters(m1)
    return aux, InteriorPoint(xa, ya, sa, p, q, t, gamma)


def initial_potential_bound(aux: AuxiliaryNetwork, point: InteriorPoint) -> float:
    """``(m1 + p) / (m Gamma) + p ln(m1^2 Gamma^3)``, the starting-potential bound."""
    m1 = aux.arc_count
    m = m1 // 3
    g = point.gamma
    return (m1 + point.p) / (m * g) + point.p * math.log(m1 ** 2 * g ** 3)


def initial_potential(aux: AuxiliaryNetwork, point: InteriorPoint) -> float:
    from .ipm import potential

    value = potential(point.x, point.s, point.q)
    if value > initial_potential_bound(aux, point) + 1e-9:
        raise SolverError("initial potential exceeds its construction bound")
    return value
