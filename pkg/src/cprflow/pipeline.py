"""End-to-end solver: reductions, interior point, rounding, flow recovery."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from . import eflow, ipm
from .core import ProblemInstance, Solution, SolverError, Status, weak_components
from .crossover import CrossoverInfeasible, crossover, expected_objective
from .finish import admissible_network, check_infeasible, recover_flow, undo_reductions
from .init import balance_arcs, initial_potential, initial_potential_bound
from .oracle import ssp_mincost
from .preprocess import reduce_instance

EXACT_NODE_LIMIT = 10


@dataclass
class SolverConfig:
    seed: int = 0
    target_gap: float = ipm.TARGET_GAP
    delta: float = ipm.DELTA
    backend: str = eflow.NAIVE
    exact: bool = False
    cap_multiplier: float = 200.0
    track_potential: bool = True
    max_retries: int = 6

    def __post_init__(self):
        if not 0 < self.target_gap <= 1:
            raise ValueError("target_gap must lie in (0, 1]")
        if not 0 < self.delta <= ipm.DELTA:
            raise ValueError("delta must lie in (0, 1/8]")
        if self.backend not in eflow.BACKEND_ALIASES:
            raise ValueError(f"unknown eflow backend {self.backend!r}")
        self.backend = eflow.BACKEND_ALIASES[self.backend]


@dataclass
class ComponentReport:
    nodes: int
    arcs: int
    method: str
    aux_arcs: int = 0
    initial_potential: float | None = None
    potential_bound: float | None = None
    iterations: int = 0
    primal_steps: int = 0
    eflow_iterations: int = 0
    retries: int = 0
    objective: int | None = None
    seconds: float = 0.0
    records: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "records"}


class _Infeasible(Exception):
    pass


def solve(instance: ProblemInstance, config: SolverConfig | None = None,
          trace: Callable[[dict], None] | None = None) -> Solution:
    """Solve a min-cost flow instance exactly.

    ``trace`` receives one dict per event (IPM step, crossover round).
    The returned solution has passed :func:`~cprflow.core.validate_solution`;
    ``solution.info`` holds per-component reports under ``"components"`` and
    the :class:`~cprflow.preprocess.ReductionTrace` under ``"reduction"``.
    """
    config = config or SolverConfig()
    if config.exact and instance.node_count > EXACT_NODE_LIMIT:
        raise ValueError(f"exact mode is limited to {EXACT_NODE_LIMIT} nodes")
    red = reduce_instance(instance)
    if red.status == "unbounded":
        return Solution.unbounded(components=[], reduction=red.trace)
    if red.status == "infeasible":
        return Solution.infeasible(components=[], reduction=red.trace)
    reduced = red.instance
    count, labels = weak_components(reduced)
    x = np.zeros(reduced.arc_count, dtype=np.int64)
    y = np.zeros(reduced.node_count, dtype=np.int64)
    reports: list[ComponentReport] = []
    for comp in range(count):
        nodes = np.flatnonzero(labels == comp)
        arcs = np.flatnonzero(labels[reduced.tail] == comp)
        if sum(int(reduced.demand[v]) for v in nodes) != 0:
            return Solution.infeasible(components=[r.summary() for r in reports],
                                       reduction=red.trace)
        index = np.full(reduced.node_count, -1, dtype=np.int64)
        index[nodes] = np.arange(len(nodes))
        sub = ProblemInstance(len(nodes), index[reduced.tail[arcs]], index[reduced.head[arcs]],
                              reduced.demand[nodes], reduced.cost[arcs], reduced.capacity[arcs])
        try:
            xc, yc, report = solve_component(sub, config, comp, trace)
        except _Infeasible:
            return Solution.infeasible(components=[r.summary() for r in reports],
                                       reduction=red.trace)
        reports.append(report)
        x[arcs] = xc
        y[nodes] = yc
    sol = undo_reductions(instance, reduced, x, y, red.trace)
    sol.info["components"] = [r.summary() for r in reports]
    sol.info["records"] = [r.records for r in reports]
    sol.info["reduction"] = red.trace
    return sol


def solve_component(sub: ProblemInstance, config: SolverConfig, index: int = 0,
                    trace: Callable[[dict], None] | None = None):
    """Solve one connected, balanced, reduced instance; returns ``(x, y, report)``."""
    started = time.perf_counter()
    if 3 * sub.arc_count < 4:
        sol = ssp_mincost(sub, enforce_limits=False)
        if sol.status is not Status.OPTIMAL:
            raise _Infeasible
        report = ComponentReport(sub.node_count, sub.arc_count, "direct", objective=sol.objective)
        return sol.flow, sol.potentials, report

    aux, start = balance_arcs(sub)
    report = ComponentReport(sub.node_count, sub.arc_count, "ipm", aux_arcs=aux.arc_count)
    if config.track_potential:
        report.initial_potential = initial_potential(aux, start)
        report.potential_bound = initial_potential_bound(aux, start)
    point = start if config.exact else start.to_float()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, index])))

    def on_step(rec):
        if trace is not None:
            trace({"event": "ipm", "component": index, **rec})

    target = config.target_gap
    for attempt in range(config.max_retries + 1):
        res = ipm.reduce_gap(aux, point, target, config.delta, rng, backend=config.backend,
                             cap_multiplier=config.cap_multiplier,
                             track_potential=config.track_potential, trace=on_step)
        report.iterations += res.iterations
        report.primal_steps += res.primal_steps
        report.eflow_iterations += sum(r.eflow_iterations for r in res.records)
        report.records.extend(res.records)
        point = res.point
        try:
            rounded = crossover(aux, point.y)
        except CrossoverInfeasible as exc:
            raise SolverError("auxiliary network reported infeasible") from exc
        if rounded.objective == expected_objective(aux, point.y):
            break
        report.retries += 1
        target /= 2
    else:
        raise SolverError("crossover certificate kept failing after retries")
    if trace is not None:
        for rec in rounded.history:
            trace({"event": "crossover", "component": index, "k": rec.k, "arc": rec.arc,
                   "branch": rec.branch, "shift": float(rec.shift)})
    report.objective = rounded.objective
    if check_infeasible(rounded.objective, sub):
        raise _Infeasible
    adm = admissible_network(aux, rounded.potentials)
    x = recover_flow(aux, adm)
    if sum(int(c) * int(f) for c, f in zip(sub.cost, x)) != rounded.objective:
        raise SolverError("recovered flow cost differs from the dual objective")
    report.seconds = time.perf_counter() - started
    return x, rounded.potentials[: sub.node_count], report
