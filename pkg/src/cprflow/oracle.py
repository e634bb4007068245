"""Reference solvers used by tests and as numeric fallbacks.

These favour transparency over speed: successive shortest paths for
min-cost flow, a dense Laplacian solve for electrical flows, brute-force
enumeration for tiny instances.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import ProblemInstance, Solution, Status, adjoint_slacks, apply_incidence

MAX_NODES = 50
MAX_DEMAND = 1000
MAX_ELECTRICAL_NODES = 200


class OracleLimitError(ValueError):
    """Instance is outside the scale the reference solvers accept."""


# --------------------------------------------------------------------------
# min-cost flow


def _negative_cycle(n, arcs) -> tuple[list[int], bool]:
    dist = [0] * n
    for _ in range(n + 1):
        changed = False
        for v, w, c in arcs:
            if dist[v] + c < dist[w]:
                dist[w] = dist[v] + c
                changed = True
        if not changed:
            return dist, False
    return dist, True


def _augmenting_feasible(instance: ProblemInstance) -> bool:
    """Edmonds-Karp feasibility check on the super-source network."""
    n = instance.node_count
    big = instance.stats.b_one_norm
    s, t = n, n + 1
    cap: dict[tuple[int, int], int] = {}
    nbrs = [set() for _ in range(n + 2)]

    def add(v, w, u):
        cap[v, w] = cap.get((v, w), 0) + u
        cap.setdefault((w, v), 0)
        nbrs[v].add(w)
        nbrs[w].add(v)

    for a in range(instance.arc_count):
        u = int(instance.capacity[a])
        add(int(instance.tail[a]), int(instance.head[a]), big if u < 0 else u)
    need = 0
    for v, b in enumerate(instance.demand.tolist()):
        if b < 0:
            add(s, v, -b)
        elif b > 0:
            add(v, t, b)
            need += b
    flow = 0
    while True:
        prev = {s: s}
        queue = deque([s])
        while queue and t not in prev:
            v = queue.popleft()
            for w in sorted(nbrs[v]):
                if w not in prev and cap[v, w] > 0:
                    prev[w] = v
                    queue.append(w)
        if t not in prev:
            return flow == need
        path = []
        w = t
        while w != s:
            path.append((prev[w], w))
            w = prev[w]
        push = min(cap[e] for e in path)
        for v, w in path:
            cap[v, w] -= push
            cap[w, v] += push
        flow += push


def ssp_mincost(instance: ProblemInstance, *, enforce_limits: bool = True) -> Solution:
    """Optimal integral flow by successive shortest paths.

    Uncapacitated arcs are first made nonnegative by a potential shift
    (Bellman-Ford); remaining negative arcs are saturated and the leftover
    imbalances are routed along Dijkstra shortest paths with reduced costs.
    The returned potentials certify optimality by complementary slackness.
    """
    n, m = instance.node_count, instance.arc_count
    if enforce_limits and (n > MAX_NODES or instance.stats.b_one_norm > MAX_DEMAND):
        raise OracleLimitError(f"oracle accepts n <= {MAX_NODES} and ||b||_1 <= {MAX_DEMAND}")
    tail = instance.tail.tolist()
    head = instance.head.tolist()
    cost = instance.cost.tolist()
    cap = instance.capacity.tolist()
    inf_arcs = [(tail[a], head[a], cost[a]) for a in range(m) if cap[a] < 0]
    shift, negative = _negative_cycle(n, inf_arcs)
    if negative:
        return Solution.unbounded() if _augmenting_feasible(instance) else Solution.infeasible()
    if not any(c < 0 for _, _, c in inf_arcs):
        shift = [0] * n
    red = [cost[a] + shift[tail[a]] - shift[head[a]] for a in range(m)]

    x = [0] * m
    need = [int(b) for b in instance.demand]   # still to arrive at v
    for a in range(m):
        if red[a] < 0:
            x[a] = cap[a]
            need[head[a]] -= cap[a]
            need[tail[a]] += cap[a]
    big = sum(abs(v) for v in need) // 2 + 1
    # residual graph: edge 2a forward, 2a+1 backward; then super arcs
    S, T = n, n + 1
    to, rcap, rcost = [], [], []
    adj = [[] for _ in range(n + 2)]

    def add(v, w, u, c):
        adj[v].append(len(to))
        to.append(w)
        rcap.append(u)
        rcost.append(c)
        adj[w].append(len(to))
        to.append(v)
        rcap.append(0)
        rcost.append(-c)

    for a in range(m):
        u = big if cap[a] < 0 else cap[a]
        add(tail[a], head[a], u, red[a])
        rcap[2 * a] -= x[a]
        rcap[2 * a + 1] += x[a]
    total = 0
    for v in range(n):
        if need[v] < 0:
            add(S, v, -need[v], 0)
        elif need[v] > 0:
            add(v, T, need[v], 0)
            total += need[v]

    pot = [0] * (n + 2)
    sent = 0
    while sent < total:
        dist = [None] * (n + 2)
        via = [-1] * (n + 2)
        dist[S] = 0
        heap = [(0, S)]
        while heap:
            d, v = heapq.heappop(heap)
            if d != dist[v]:
                continue
            for e in adj[v]:
                if rcap[e] <= 0:
                    continue
                w = to[e]
                nd = d + rcost[e] + pot[v] - pot[w]
                if dist[w] is None or nd < dist[w]:
                    dist[w] = nd
                    via[w] = e
                    heapq.heappush(heap, (nd, w))
        if dist[T] is None:
            return Solution.infeasible()
        dt = dist[T]
        for v in range(n + 2):
            pot[v] += dt if dist[v] is None else min(dist[v], dt)
        push = total - sent
        v = T
        while v != S:
            e = via[v]
            push = min(push, rcap[e])
            v = to[e ^ 1]
        v = T
        while v != S:
            e = via[v]
            rcap[e] -= push
            rcap[e ^ 1] += push
            v = to[e ^ 1]
        sent += push

    flow = np.array([rcap[2 * a + 1] for a in range(m)], dtype=np.int64)
    y = np.array([pot[v] + shift[v] for v in range(n)], dtype=np.int64)
    y -= y[0]
    objective = sum(int(c) * int(f) for c, f in zip(cost, flow.tolist()))
    return Solution(Status.OPTIMAL, objective, flow, y)


def brute_force_mincost(instance: ProblemInstance, max_states: int = 200_000) -> Solution:
    """Enumerate every integral flow; uncapacitated arcs are bounded by ``||b||_1``.

    An instance whose optimum over that box saturates an uncapacitated
    negative-cost cycle is reported unbounded.  Flows and potentials are not
    returned, only status and objective.
    """
    m = instance.arc_count
    b1 = instance.stats.b_one_norm
    bounds = [b1 + 1 if u < 0 else int(u) for u in instance.capacity.tolist()]
    states = 1
    for u in bounds:
        states *= u + 1
    if states > max_states:
        raise OracleLimitError(f"{states} flow vectors exceed max_states={max_states}")
    demand = instance.demand.tolist()
    cost = instance.cost.tolist()
    best = None
    for x in itertools.product(*(range(u + 1) for u in bounds)):
        if apply_incidence(instance, np.array(x, dtype=np.int64)).tolist() != demand:
            continue
        value = sum(c * f for c, f in zip(cost, x))
        if best is None or value < best[0]:
            best = (value, x)
    if best is None:
        return Solution.infeasible()
    _, negative = _negative_cycle(instance.node_count, [
        (int(instance.tail[a]), int(instance.head[a]), cost[a])
        for a in range(m) if instance.capacity[a] < 0])
    if negative:
        return Solution.unbounded()
    return Solution(Status.OPTIMAL, best[0], np.array(best[1], dtype=np.int64))


# --------------------------------------------------------------------------
# electrical flows


def _laplacian(network, exact: bool):
    n = network.node_count
    r = network.resistance
    if exact:
        L = [[Fraction(0)] * n for _ in range(n)]
        for a in range(network.arc_count):
            v, w = int(network.tail[a]), int(network.head[a])
            g = 1 / Fraction(r[a])
            L[v][v] += g
            L[w][w] += g
            L[v][w] -= g
            L[w][v] -= g
        return L
    g = 1.0 / np.asarray(r, dtype=float)
    L = np.zeros((n, n))
    np.add.at(L, (network.tail, network.tail), g)
    np.add.at(L, (network.head, network.head), g)
    np.add.at(L, (network.tail, network.head), -g)
    np.add.at(L, (network.head, network.tail), -g)
    return L


def _solve_fraction(M, rhs):
    """Gauss-Jordan elimination over the rationals."""
    k = len(rhs)
    aug = [list(row) + [rhs[i]] for i, row in enumerate(M)]
    for col in range(k):
        piv = next((i for i in range(col, k) if aug[i][col] != 0), None)
        if piv is None:
            raise ValueError("singular Laplacian: network is disconnected")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for i in range(k):
            if i != col and aug[i][col] != 0:
                factor = aug[i][col]
                aug[i] = [a - factor * b for a, b in zip(aug[i], aug[col])]
    return [row[k] for row in aug]


def exact_electrical(network, exact: bool | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Electrical flow ``f*`` and voltages ``pi*`` (``pi*_0 = 0``).

    Solves the reduced Laplacian system ``L pi = chi`` densely, then applies
    Ohm's law ``f*_a = (pi_head - pi_tail) / r_a``.  With ``exact`` (the
    default for object-dtype resistances) the solve is done in rationals.
    """
    n = network.node_count
    if n > MAX_ELECTRICAL_NODES:
        raise OracleLimitError(f"dense solve limited to {MAX_ELECTRICAL_NODES} nodes")
    if exact is None:
        exact = np.asarray(network.resistance).dtype == object
    chi = network.sources
    L = _laplacian(network, exact)
    if exact:
        sol = _solve_fraction([row[1:] for row in L[1:]], [Fraction(c) for c in chi[1:]]) if n > 1 else []
        pi = np.array([Fraction(0)] + sol, dtype=object)
        r = np.array([Fraction(v) for v in network.resistance], dtype=object)
    else:
        pi = np.zeros(n)
        if n > 1:
            try:
                pi[1:] = np.linalg.solve(L[1:, 1:], np.asarray(chi[1:], dtype=float))
            except np.linalg.LinAlgError as exc:
                raise ValueError("singular Laplacian: network is disconnected") from exc
        r = np.asarray(network.resistance, dtype=float)
    f = (pi[network.head] - pi[network.tail]) / r
    return f, pi


# --------------------------------------------------------------------------
# certificates


@dataclass
class CertificateReport:
    primal_residual: float
    negative_flow: float
    dual_residual: float
    negative_slack: float
    duality_gap: float
    complementarity_violations: int

    @property
    def optimal(self) -> bool:
        return (self.primal_residual == 0 and self.negative_flow == 0 and self.dual_residual == 0
                and self.negative_slack == 0 and self.complementarity_violations == 0)


def duality_certificates(x, y, s, instance, tol: float = 0.0) -> CertificateReport:
    """Residuals of the pair ``min c^T x, Ax = b, x >= 0`` / ``max b^T y, s = c - A^T y >= 0``.

    ``instance`` is anything with ``node_count``, ``tail``, ``head``,
    ``cost`` and ``demand``; capacities are not consulted.
    """
    x = np.asarray(x)
    s = np.asarray(s)
    primal = apply_incidence(instance, x) - np.asarray(instance.demand)
    dual = adjoint_slacks(instance, np.asarray(y)) - s
    return CertificateReport(
        primal_residual=float(np.abs(primal).max(initial=0)),
        negative_flow=float(max(0, -min(x.min(initial=0), 0))),
        dual_residual=float(np.abs(dual).max(initial=0)),
        negative_slack=float(max(0, -min(s.min(initial=0), 0))),
        duality_gap=float((x * s).sum()),
        complementarity_violations=int(np.sum((np.abs(x) > tol) & (np.abs(s) > tol))),
    )
