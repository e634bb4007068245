"""Dinic's max-flow and the demands-to-max-flow reduction."""

from __future__ import annotations

from collections import deque

import numpy as np


class Dinic:
    """Max-flow on a residual graph stored as flat edge lists."""

    def __init__(self, node_count: int):
        self.n = node_count
        self.adj: list[list[int]] = [[] for _ in range(node_count)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, capacity: int) -> int:
        """Add ``u -> v``; returns the edge id, whose reverse is ``id ^ 1``."""
        eid = len(self.to)
        self.to += [v, u]
        self.cap += [capacity, 0]
        self.adj[u].append(eid)
        self.adj[v].append(eid + 1)
        return eid

    def flow_on(self, eid: int) -> int:
        return self.cap[eid ^ 1]

    def _bfs(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self.adj[u]:
                if self.cap[e] > 0 and level[self.to[e]] < 0:
                    level[self.to[e]] = level[u] + 1
                    queue.append(self.to[e])
        return level if level[t] >= 0 else None

    def max_flow(self, s: int, t: int) -> int:
        total = 0
        to, cap, adj = self.to, self.cap, self.adj
        while (level := self._bfs(s, t)) is not None:
            it = [0] * self.n
            while True:
                # iterative blocking-flow DFS
                stack = [s]
                path: list[int] = []
                pushed = 0
                while stack:
                    u = stack[-1]
                    if u == t:
                        pushed = min(cap[e] for e in path)
                        for e in path:
                            cap[e] -= pushed
                            cap[e ^ 1] += pushed
                        break
                    advanced = False
                    while it[u] < len(adj[u]):
                        e = adj[u][it[u]]
                        v = to[e]
                        if cap[e] > 0 and level[v] == level[u] + 1:
                            stack.append(v)
                            path.append(e)
                            advanced = True
                            break
                        it[u] += 1
                    if not advanced:
                        stack.pop()
                        if path:
                            path.pop()
                        if stack:
                            it[stack[-1]] += 1
                        level[u] = -1
                if not pushed:
                    break
                total += pushed
        return total


def feasible_flow(node_count: int, tail, head, capacity, demand) -> np.ndarray | None:
    """Find ``0 <= x <= capacity`` with inflow - outflow = demand, or ``None``.

    Super-source edges feed supply nodes (negative demand); demand nodes
    drain into a super-sink.  Feasible iff the max flow saturates them.
    """
    s, t = node_count, node_count + 1
    net = Dinic(node_count + 2)
    ids = [net.add_edge(int(v), int(w), int(u)) for v, w, u in zip(tail, head, capacity)]
    need = 0
    for v, b in enumerate(demand):
        b = int(b)
        if b < 0:
            net.add_edge(s, v, -b)
        elif b > 0:
            net.add_edge(v, t, b)
            need += b
    if net.max_flow(s, t) != need:
        return None
    return np.array([net.flow_on(e) for e in ids], dtype=np.int64)
