"""Seeded random instance families.

Every family returns a weakly connected, demand-balanced instance and is
fully determined by its arguments.
"""

from __future__ import annotations

import numpy as np

from .core import UNCAPACITATED, ProblemInstance

FAMILIES = ("random-connected", "grid", "transshipment")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _demands(rng, nodes, b_one_norm: int, n: int) -> list[int]:
    """Pair up units of supply and demand on ``nodes`` until ``||b||_1`` is reached."""
    b = [0] * n
    nodes = list(nodes)
    if len(nodes) < 2:
        return b
    for _ in range(b_one_norm // 2):
        v, w = rng.choice(len(nodes), size=2, replace=False)
        b[nodes[v]] -= 1
        b[nodes[w]] += 1
    return b


def _routed_demands(rng, n, arcs, capacity, units: int, starts=None) -> list[int]:
    """Demands of ``units`` random walks along arcs with spare capacity.

    Each walk sends one unit from its start to its end, so the instance is
    feasible by construction.  Walks that cannot leave their start are
    retried from another node a few times and then skipped.
    """
    out = [[] for _ in range(n)]
    for a, (v, _) in enumerate(arcs):
        out[v].append(a)
    spare = [None if u == UNCAPACITATED else int(u) for u in capacity]
    b = [0] * n
    for _ in range(units):
        for _try in range(8):
            v = int(rng.integers(n)) if starts is None else starts[int(rng.integers(len(starts)))]
            start, length = v, int(rng.integers(1, n + 1))
            used = []
            for _step in range(length):
                options = [a for a in out[v] if spare[a] is None or spare[a] > 0]
                if not options:
                    break
                a = options[int(rng.integers(len(options)))]
                if spare[a] is not None:
                    spare[a] -= 1
                used.append(a)
                v = arcs[a][1]
            if used and v != start:
                b[start] -= 1
                b[v] += 1
                break
            for a in used:
                if spare[a] is not None:
                    spare[a] += 1
    return b


def _finish(rng, n, arcs, demand, max_cost, max_capacity, negative_costs, uncapacitated,
            b_one_norm, feasible, negative_uncapacitated=False, starts=None):
    lo = -max_cost if negative_costs else 0
    m = len(arcs)
    cost = rng.integers(lo, max_cost + 1, size=m)
    capacity = rng.integers(1, max_capacity + 1, size=m)
    if uncapacitated > 0:
        free = rng.random(m) < uncapacitated
        capacity[free] = UNCAPACITATED
        if not negative_uncapacitated:
            # nonnegative costs on uncapacitated arcs keep the instance bounded
            cost[free] = np.abs(cost[free])
    if feasible:
        demand = _routed_demands(rng, n, arcs, capacity, b_one_norm // 2, starts)
    return ProblemInstance(
        node_count=n,
        tail=[a for a, _ in arcs],
        head=[b for _, b in arcs],
        demand=demand, cost=cost, capacity=capacity,
    )


def _check(n: int, m: int):
    if n < 1:
        raise ValueError("need at least one node")
    if m < n - 1:
        raise ValueError(f"m={m} arcs cannot connect n={n} nodes")
    if n == 1 and m > 0:
        raise ValueError("a single node admits no arcs (self-loops are not allowed)")


def _oriented(rng, v, w):
    return (v, w) if rng.random() < 0.5 else (w, v)


def random_connected(n: int, m: int, seed: int = 0, *, max_cost: int = 20,
                     max_capacity: int = 20, b_one_norm: int = 20,
                     negative_costs: bool = True, uncapacitated: float = 0.0,
                     feasible: bool = True, negative_uncapacitated: bool = False
                     ) -> ProblemInstance:
    """Random spanning tree plus uniformly random extra arcs."""
    _check(n, m)
    rng = _rng(seed)
    perm = rng.permutation(n)
    arcs = []
    for i in range(1, n):
        arcs.append(_oriented(rng, int(perm[i]), int(perm[rng.integers(i)])))
    while len(arcs) < m:
        v, w = rng.choice(n, size=2, replace=False)
        arcs.append((int(v), int(w)))
    order = rng.permutation(m)
    arcs = [arcs[i] for i in order]
    demand = _demands(rng, range(n), b_one_norm, n)
    return _finish(rng, n, arcs, demand, max_cost, max_capacity, negative_costs, uncapacitated,
                   b_one_norm, feasible, negative_uncapacitated)


def grid(n: int, m: int, seed: int = 0, *, max_cost: int = 20, max_capacity: int = 20,
         b_one_norm: int = 20, negative_costs: bool = False, uncapacitated: float = 0.0,
         feasible: bool = True, negative_uncapacitated: bool = False) -> ProblemInstance:
    """Nodes filled row by row into a grid of width ``ceil(sqrt(n))``.

    A random spanning tree of the grid comes first; remaining grid edges
    follow in random order, then parallel copies if ``m`` exceeds the grid.
    """
    _check(n, m)
    rng = _rng(seed)
    width = max(1, int(np.ceil(np.sqrt(n))))
    edges = []
    for v in range(n):
        if (v + 1) % width and v + 1 < n:
            edges.append((v, v + 1))
        if v + width < n:
            edges.append((v, v + width))
    edges = [edges[i] for i in rng.permutation(len(edges))]
    comp = list(range(n))

    def find(v):
        while comp[v] != v:
            comp[v] = comp[comp[v]]
            v = comp[v]
        return v

    tree, rest = [], []
    for v, w in edges:
        rv, rw = find(v), find(w)
        if rv != rw:
            comp[rv] = rw
            tree.append((v, w))
        else:
            rest.append((v, w))
    chosen = tree + rest
    while len(chosen) < m:
        chosen += edges[: m - len(chosen)]
    arcs = [_oriented(rng, v, w) for v, w in chosen[:m]]
    demand = _demands(rng, range(n), b_one_norm, n)
    return _finish(rng, n, arcs, demand, max_cost, max_capacity, negative_costs, uncapacitated,
                   b_one_norm, feasible, negative_uncapacitated)


def transshipment(n: int, m: int, seed: int = 0, *, max_cost: int = 20,
                  max_capacity: int = 20, b_one_norm: int = 20,
                  negative_costs: bool = False, uncapacitated: float = 0.0,
                  feasible: bool = True, negative_uncapacitated: bool = False
                  ) -> ProblemInstance:
    """Sources feed sinks through a middle layer; every arc points forward.

    About a quarter of the nodes are sources and a quarter sinks.
    """
    _check(n, m)
    if n < 3:
        return random_connected(n, m, seed, max_cost=max_cost, max_capacity=max_capacity,
                                b_one_norm=b_one_norm, negative_costs=negative_costs,
                                uncapacitated=uncapacitated, feasible=feasible,
                                negative_uncapacitated=negative_uncapacitated)
    rng = _rng(seed)
    k = max(1, n // 4)
    sources = list(range(k))
    sinks = list(range(n - k, n))
    middle = list(range(k, n - k))
    layer = [0] * k + [1] * len(middle) + [2] * k

    def forward(v, w):
        return (v, w) if layer[v] < layer[w] or (layer[v] == layer[w] and v < w) else (w, v)

    perm = rng.permutation(n)
    arcs = []
    for i in range(1, n):
        arcs.append(forward(int(perm[i]), int(perm[rng.integers(i)])))
    while len(arcs) < m:
        v, w = rng.choice(n, size=2, replace=False)
        arcs.append(forward(int(v), int(w)))
    b = [0] * n
    for _ in range(b_one_norm // 2):
        b[sources[rng.integers(k)]] -= 1
        b[sinks[rng.integers(k)]] += 1
    return _finish(rng, n, arcs, b, max_cost, max_capacity, negative_costs, uncapacitated,
                   b_one_norm, feasible, negative_uncapacitated, starts=sources)


def generate(family: str, n: int, m: int, seed: int = 0, **options) -> ProblemInstance:
    try:
        build = {"random-connected": random_connected, "grid": grid,
                 "transshipment": transshipment}[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}") from None
    return build(n, m, seed, **options)


def suite_instance(index: int, seed: int = 0) -> ProblemInstance:
    """Instance ``index`` of the randomized regression suite.

    Sizes are drawn from ``n <= 30``, ``m <= 100`` with ``C, U <= 20`` and
    ``||b||_1 <= 40``.  Most instances are feasible by construction; the
    rest take unrouted demands and are often infeasible.  Some carry
    uncapacitated arcs, a few of them with negative costs (possibly
    unbounded).
    """
    rng = _rng(seed * 1_000_003 + index)
    n = int(rng.integers(2, 31))
    m = int(rng.integers(n - 1, min(100, 3 * n) + 1))
    family = FAMILIES[index % 3]
    uncap = float(rng.choice([0.0, 0.0, 0.2, 0.5]))
    return generate(
        family, n, m, seed=int(rng.integers(2 ** 31)),
        max_cost=int(rng.integers(1, 21)), max_capacity=int(rng.integers(1, 21)),
        b_one_norm=2 * int(rng.integers(0, 21)),
        negative_costs=bool(rng.random() < 0.5),
        uncapacitated=uncap,
        feasible=bool(rng.random() < 0.8),
        negative_uncapacitated=bool(uncap > 0 and rng.random() < 0.3),
    )
