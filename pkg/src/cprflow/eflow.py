"""Certifying approximate electrical flows by randomized cycle updates.

A spanning tree ``T`` fixes a flow meeting the current sources; sampling
non-tree arcs with probability proportional to ``r(C_a) / r_a`` and
cancelling the voltage drop around each fundamental cycle converges to the
electrical flow.  Tree-induced voltages give a dual solution, and the gap

    f^T R f - 2 pi^T chi + sum_a (pi_head - pi_tail)^2 / r_a

bounds both the primal and the dual error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .core import SolverError, apply_incidence

NAIVE = "naive"
TREE = "tree"
BACKENDS = (NAIVE, TREE)
# short names used on the command line
BACKEND_ALIASES = {"a": NAIVE, "b": TREE, NAIVE: NAIVE, TREE: TREE}
HISTORY_ROWS = 256


@dataclass(eq=False)
class ResistiveNetwork:
    node_count: int
    tail: np.ndarray
    head: np.ndarray
    resistance: np.ndarray
    sources: np.ndarray
    indptr: np.ndarray | None = None
    adj: np.ndarray | None = None

    def __post_init__(self):
        if self.indptr is None:
            m = len(self.tail)
            ends = np.concatenate([self.tail, self.head])
            order = np.argsort(ends, kind="stable")
            self.adj = (order % m).astype(np.int64) if m else order.astype(np.int64)
            indptr = np.zeros(self.node_count + 1, dtype=np.int64)
            np.add.at(indptr, ends + 1, 1)
            self.indptr = np.cumsum(indptr)

    @property
    def arc_count(self) -> int:
        return len(self.tail)

    @property
    def exact(self) -> bool:
        return self.resistance.dtype == object


@dataclass(eq=False)
class SpanningTreeIndex:
    root: int
    parent: np.ndarray
    parent_arc: np.ndarray
    depth: np.ndarray
    order: np.ndarray
    in_tree: np.ndarray
    nontree: np.ndarray
    cycle_resistance: np.ndarray
    probability: np.ndarray
    tau: float
    kind: str = ""

    def cycle_resistance_by_arc(self, m: int, dtype=float) -> np.ndarray:
        out = np.ones(m, dtype=dtype)
        out[self.nontree] = self.cycle_resistance
        return out


@dataclass
class ElectricalSolution:
    flow: np.ndarray
    voltages: np.ndarray
    gap: float
    iterations: int
    tau: float
    recomputes: int = 0
    fallback: bool = False
    history: list = field(default_factory=list)


def _kernel(name: str, exact: bool):
    return K.python(name) if exact else K.jitted(name)


def _index_tree(network: ResistiveNetwork, in_tree: np.ndarray, root: int, kind: str
                ) -> SpanningTreeIndex:
    n = network.node_count
    parent = np.empty(n, dtype=np.int64)
    parent_arc = np.empty(n, dtype=np.int64)
    depth = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    size = K.jitted("root_tree")(n, network.tail, network.head, in_tree, network.indptr,
                                 network.adj, root, parent, parent_arc, depth, order)
    if size != n:
        raise ValueError("resistive network is not connected")
    nontree = np.flatnonzero(~in_tree)
    r = network.resistance
    exact = network.exact
    rc = np.empty(len(nontree), dtype=object if exact else float)
    _kernel("cycle_resistances", exact)(network.tail, network.head, r, parent, parent_arc,
                                        depth, nontree, rc)
    ratio = (rc / r[nontree]).astype(float) if len(nontree) else np.zeros(0)
    tau = float(ratio.sum())
    prob = ratio / tau if len(nontree) else ratio
    return SpanningTreeIndex(root, parent, parent_arc, depth, order, in_tree, nontree,
                             rc, prob, tau, kind)


def build_spanning_tree(network: ResistiveNetwork, rng: np.random.Generator | None = None,
                        root: int | None = None) -> SpanningTreeIndex:
    """Best of a minimum spanning tree and a shortest-path tree, by measured tau.

    Both are taken with respect to the resistances; the shortest-path tree is
    rooted at a random node when ``rng`` is given.
    """
    n, m = network.node_count, network.arc_count
    r = network.resistance.astype(float)
    if root is None:
        root = int(rng.random() * n) if rng is not None else 0
    mst = np.zeros(m, dtype=np.bool_)
    picked = K.jitted("kruskal")(n, network.tail, network.head, r, mst)
    if picked != n - 1:
        raise ValueError("resistive network is not connected")
    best = _index_tree(network, mst, root, "mst")
    if len(best.nontree):
        spt = np.zeros(m, dtype=np.bool_)
        K.jitted("shortest_path_tree")(n, network.tail, network.head, r, network.indptr,
                                       network.adj, root, spt)
        other = _index_tree(network, spt, root, "spt")
        if other.tau < best.tau:
            best = other
    return best


def tree_flow(network: ResistiveNetwork, tree: SpanningTreeIndex, flow=None) -> np.ndarray:
    """Flow meeting the sources; tree arcs absorb whatever non-tree arcs leave.

    With ``flow`` omitted, non-tree arcs carry zero.
    """
    exact = network.exact
    dtype = object if exact else float
    f = np.zeros(network.arc_count, dtype=dtype)
    if exact:
        f[:] = 0
    if flow is not None:
        f[tree.nontree] = np.asarray(flow)[tree.nontree]
    excess = np.array(network.sources, dtype=dtype) - apply_incidence(network, f)
    _kernel("tree_flow", exact)(network.tail, network.head, excess, tree.parent,
                                tree.parent_arc, tree.order, f)
    return f


def tree_voltages(network: ResistiveNetwork, tree: SpanningTreeIndex, f) -> np.ndarray:
    """Potentials with ``pi_root = 0`` making Ohm's law exact on tree arcs."""
    exact = network.exact
    pi = np.zeros(network.node_count, dtype=object if exact else float)
    _kernel("tree_voltages", exact)(network.tail, network.head, network.resistance, f,
                                    tree.parent, tree.parent_arc, tree.order, pi)
    return pi


def cycle_update(network: ResistiveNetwork, tree: SpanningTreeIndex, f, arc: int) -> np.ndarray:
    """Cancel the voltage drop around the fundamental cycle of non-tree ``arc`` (in place)."""
    if tree.in_tree[arc]:
        raise ValueError(f"arc {arc} is a tree arc")
    exact = network.exact
    rc = tree.cycle_resistance_by_arc(network.arc_count, object if exact else float)
    _kernel("naive_updates", exact)(network.tail, network.head, network.resistance, f,
                                    tree.parent, tree.parent_arc, tree.depth, rc,
                                    np.array([arc], dtype=np.int64))
    return f


def energy(network: ResistiveNetwork, f):
    return (network.resistance * f * f).sum()


def gap(network: ResistiveNetwork, f, pi):
    """Primal energy minus dual objective of ``(f, pi)``.

    Evaluated as ``sum_a r_a (f_a - dpi_a / r_a)^2 + 2 pi^T (A f - chi)``,
    which equals the defining expression and avoids cancellation when
    ``A f = chi``.
    """
    exact = network.exact
    resid = _kernel("ohm_residual_energy", exact)(network.tail, network.head,
                                                  network.resistance, f, pi)
    return resid + 2 * (pi * (apply_incidence(network, f) - network.sources)).sum()


def gap_by_definition(network: ResistiveNetwork, f, pi):
    r = network.resistance
    dpi = pi[network.head] - pi[network.tail]
    return (r * f * f).sum() - 2 * (pi * network.sources).sum() + (dpi * dpi / r).sum()


class _HLDState:
    """Tree flows held in a heavy-light decomposition for O(log^2 n) updates."""

    def __init__(self, network: ResistiveNetwork, tree: SpanningTreeIndex, f, exact: bool):
        n = network.node_count
        self.exact = exact
        self.chead = np.empty(n, dtype=np.int64)
        self.pos = np.empty(n, dtype=np.int64)
        K.jitted("hld_layout")(n, tree.parent, tree.order, self.chead, self.pos)
        size, log = 1, 0
        while size < n:
            size *= 2
            log += 1
        self.size, self.log = size, log
        dtype = object if exact else float
        self.d = np.zeros(2 * size, dtype=dtype)
        self.lz = np.zeros(2 * size, dtype=dtype)
        self.wsum = np.zeros(2 * size, dtype=dtype)
        _kernel("hld_init", exact)(network.resistance, f, tree.parent_arc, network.tail,
                                   tree.order, self.pos, self.d, self.wsum, size)

    def run(self, network, tree, f, rc, seq):
        _kernel("hld_cycle_updates", self.exact)(
            network.tail, network.head, network.resistance, f, tree.parent, self.chead,
            self.pos, self.d, self.lz, self.wsum, self.size, self.log, rc, seq)
        _kernel("hld_sync", self.exact)(f, tree.parent_arc, network.tail, tree.order, self.pos,
                                        self.d, self.lz, self.wsum, self.size)


def solve(network: ResistiveNetwork, delta: float, rng: np.random.Generator, *,
          backend: str = NAIVE, cap_multiplier: float = 200.0,
          stop: Callable[[np.ndarray, np.ndarray, float], bool] | None = None,
          tree: SpanningTreeIndex | None = None,
          trace: Callable[[dict], None] | None = None) -> ElectricalSolution:
    """Approximate electrical flow with ``gap < delta``.

    Voltages and the gap are refreshed once before sampling and then after
    every ``m`` cycle updates.  ``stop``, if given, replaces the gap test.
    When the iteration cap ``cap_multiplier * tau * ln(gap0 / delta)`` is
    exhausted the dense exact solver takes over.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if backend not in BACKEND_ALIASES:
        raise ValueError(f"unknown backend {backend!r}")
    backend = BACKEND_ALIASES[backend]
    exact = network.exact
    if not exact and stop is None and tree is None:
        return _compiled_solve(network, delta, rng, backend, cap_multiplier, trace)
    if tree is None:
        tree = build_spanning_tree(network, rng)
    f = tree_flow(network, tree)
    pi = tree_voltages(network, tree, f)
    g = gap(network, f, pi)
    history = [(0, float(energy(network, f)), float(g))]
    if trace:
        trace({"iteration": 0, "energy": history[-1][1], "gap": history[-1][2]})

    def done(f, pi, g):
        return stop(f, pi, g) if stop is not None else g < delta

    iterations = 0
    recomputes = 1
    m = network.arc_count
    k = len(tree.nontree)
    if k == 0 or done(f, pi, g):
        return ElectricalSolution(f, pi, g, 0, tree.tau, recomputes, history=history)

    cap = cap_multiplier * max(tree.tau, 1.0) * max(1.0, math.log(max(float(g), delta) / delta) + 1.0)
    cum = np.cumsum(tree.probability)
    rc = tree.cycle_resistance_by_arc(m, object if exact else float)
    hld = _HLDState(network, tree, f, exact) if backend == TREE else None
    updates = _kernel("naive_updates", exact)
    while not done(f, pi, g):
        if iterations >= cap:
            return _fallback(network, tree, iterations, recomputes, history)
        draws = rng.random(m) * cum[-1]
        seq = tree.nontree[np.minimum(np.searchsorted(cum, draws, side="right"), k - 1)]
        if hld is None:
            updates(network.tail, network.head, network.resistance, f, tree.parent,
                    tree.parent_arc, tree.depth, rc, seq)
        else:
            hld.run(network, tree, f, rc, seq)
        iterations += m
        pi = tree_voltages(network, tree, f)
        g = gap(network, f, pi)
        recomputes += 1
        history.append((iterations, float(energy(network, f)), float(g)))
        if trace:
            trace({"iteration": iterations, "energy": history[-1][1], "gap": history[-1][2]})
        if g < -1e-9 * max(1.0, history[-1][1]):
            raise SolverError(f"electrical gap became negative ({g})")
    return ElectricalSolution(f, pi, g, iterations, tree.tau, recomputes, history=history)


def _compiled_solve(network, delta, rng, backend, cap_multiplier, trace) -> ElectricalSolution:
    """Same algorithm and random stream as the Python loop, in one compiled call."""
    n, m = network.node_count, network.arc_count
    f = np.empty(m)
    pi = np.empty(n)
    hist = np.empty((HISTORY_ROWS, 3))
    info = np.zeros(5)
    status = K.jitted("electrical_solve")(
        n, network.tail, network.head, np.asarray(network.resistance, dtype=float),
        np.asarray(network.sources, dtype=float), network.indptr, network.adj, rng,
        float(delta), float(cap_multiplier), backend == TREE, f, pi, hist, info)
    return _compiled_result(network, status, f, pi, hist, info, trace)


def _compiled_result(network, status, f, pi, hist, info, trace) -> ElectricalSolution:
    if status == 3:
        raise ValueError("resistive network is not connected")
    history = [(int(i), float(e), float(g)) for i, e, g in hist[: int(info[4])]]
    if trace:
        for i, e, g in history:
            trace({"iteration": i, "energy": e, "gap": g})
    if status == 2:
        raise SolverError(f"electrical gap became negative ({info[1]})")
    iterations, recomputes = int(info[0]), int(info[3])
    if status == 1:
        from .oracle import exact_electrical

        f, pi = exact_electrical(network)
        return ElectricalSolution(f, pi, gap(network, f, pi), iterations, float(info[2]),
                                  recomputes, fallback=True, history=history)
    return ElectricalSolution(f, pi, float(info[1]), iterations, float(info[2]), recomputes,
                              history=history)


def _fallback(network, tree, iterations, recomputes, history) -> ElectricalSolution:
    from .oracle import exact_electrical

    f, pi = exact_electrical(network)
    return ElectricalSolution(f, pi, gap(network, f, pi), iterations, tree.tau, recomputes,
                              fallback=True, history=history)
