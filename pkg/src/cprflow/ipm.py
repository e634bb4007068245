"""Potential-reduction loop driven by approximate electrical projections.

Every iteration works in the scaled space where the current ``x`` is the
all-ones vector.  The scaled gradient ``g'`` is split, via one electrical
flow with resistances ``x^-2`` and sources ``A (x * g')``, into a cycle part
``x_hat`` and a cut part ``s_hat``; the residual ``z = g' - s_hat`` decides
between a primal step along ``x_hat`` and a dual step along the voltages.

The step logic needs neither logarithms nor square roots.  The potential is
only evaluated for the trace and the per-step checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _kernels as K
from . import eflow
from .core import NumericAlarm, SolverError, adjoint_slacks, apply_incidence
from .init import AuxiliaryNetwork, InteriorPoint

LAMBDA = Fraction(1, 4)
DELTA = 1 / 8
TARGET_GAP = 0.5
PRIMAL_DECREASE = 1 / 64
DUAL_DECREASE = 1 / 12
PRIMAL, DUAL = "primal", "dual"

_TOL = 1e-9


def potential(x, s, q: int) -> float:
    """``q ln(x^T s) - sum ln(x_a s_a) - m ln m``; exact inputs are logged without rounding."""
    x = np.asarray(x)
    s = np.asarray(s)
    if np.any(x <= 0) or np.any(s <= 0):
        raise ValueError("potential needs x > 0 and s > 0")
    m = len(x)
    prod = x * s
    if prod.dtype == object:
        return q * _log(sum(prod)) - sum(_log(v) for v in prod) - m * math.log(m)
    return q * math.log(prod.sum()) - float(np.log(prod).sum()) - m * math.log(m)


def _log(v) -> float:
    if isinstance(v, Fraction):
        # log of a ratio of big integers without overflowing to float
        return _log(v.numerator) - _log(v.denominator)
    if isinstance(v, int) and v.bit_length() > 1000:
        shift = v.bit_length() - 60
        return math.log(v >> shift) + shift * math.log(2)
    return math.log(v)


@dataclass
class Projection:
    """Scaled gradient split by one electrical solve."""
    gradient: np.ndarray        # g'
    resistance: np.ndarray      # x^-2
    sources: np.ndarray         # A (x * g')
    flow: np.ndarray            # f
    voltages: np.ndarray        # pi
    x_hat: np.ndarray           # g' - f / x
    s_hat: np.ndarray           # x * (pi_head - pi_tail)
    z: np.ndarray               # g' - s_hat
    z2: object                  # ||z||^2
    electrical: eflow.ElectricalSolution | None = None


@dataclass
class StepRecord:
    iteration: int
    kind: str
    gap: float
    potential_before: float | None
    potential_after: float | None
    z2: float
    eflow_iterations: int
    min_ratio: float

    @property
    def decrease(self) -> float | None:
        if self.potential_before is None:
            return None
        return self.potential_before - self.potential_after

    def as_json(self) -> dict:
        return {"iter": self.iteration, "kind": self.kind, "gap": self.gap,
                "potential": self.potential_after, "z2": self.z2,
                "eflow_iters": self.eflow_iterations}


@dataclass
class IPMResult:
    point: InteriorPoint
    iterations: int
    initial_potential: float | None
    records: list[StepRecord] = field(default_factory=list)

    @property
    def primal_steps(self) -> int:
        return sum(r.kind == PRIMAL for r in self.records)


def projection_inputs(aux, x, s, q: int):
    """Return ``(r, chi, g')`` for the current iterate."""
    prod = x * s
    total = prod.sum()
    g = prod * (q / total) - 1
    r = 1 / (x * x)
    chi = apply_incidence(aux, x * g)
    return r, chi, g


def _network(aux, r, chi) -> eflow.ResistiveNetwork:
    indptr, adj = _adjacency(aux)
    return eflow.ResistiveNetwork(aux.node_count, aux.tail, aux.head, r, chi, indptr, adj)


_ADJ_CACHE: dict[int, tuple] = {}


def _adjacency(aux):
    key = id(aux)
    hit = _ADJ_CACHE.get(key)
    if hit is None or hit[0] is not aux:
        net = eflow.ResistiveNetwork(aux.node_count, aux.tail, aux.head,
                                     np.ones(len(aux.tail)), np.zeros(aux.node_count))
        hit = (aux, net.indptr, net.adj)
        _ADJ_CACHE.clear()
        _ADJ_CACHE[key] = hit
    return hit[1], hit[2]


def project(aux, point: InteriorPoint, rng, delta: float = DELTA, *,
            backend: str = eflow.NAIVE, cap_multiplier: float = 200.0) -> Projection:
    """One electrical solve for the scaled gradient, with ``gap < delta``."""
    x, s = point.x, point.s
    r, chi, g = projection_inputs(aux, x, s, point.q)
    if point.exact:
        sol = _exact_electrical_solve(aux, r, chi, delta, rng, backend, cap_multiplier)
    else:
        sol = eflow.solve(_network(aux, r, chi), delta, rng, backend=backend,
                          cap_multiplier=cap_multiplier)
    f, pi = sol.flow, sol.voltages
    x_hat = g - f / x
    s_hat = x * (pi[aux.head] - pi[aux.tail])
    z = g - s_hat
    return Projection(g, r, chi, f, pi, x_hat, s_hat, z, (z * z).sum(), sol)


def _exact_electrical_solve(aux, r, chi, delta, rng, backend, cap_multiplier):
    """Float sampling, then an exact tree repair of conservation.

    The float flow is rounded to rationals on non-tree arcs; tree arcs are
    recomputed exactly so that ``A f = chi`` holds without error, and the
    gap is evaluated exactly.  The float tolerance is tightened until the
    exact gap certifies ``delta``.
    """
    fnet = _network(aux, r.astype(float), chi.astype(float))
    xnet = _network(aux, r, chi)
    tol = delta / 2
    for _ in range(30):
        sol = eflow.solve(fnet, tol, rng, backend=backend, cap_multiplier=cap_multiplier)
        tree = eflow.build_spanning_tree(fnet, root=0)
        guess = np.array([Fraction(v) for v in sol.flow], dtype=object)
        f = eflow.tree_flow(xnet, tree, guess)
        pi = eflow.tree_voltages(xnet, tree, f)
        g = eflow.gap(xnet, f, pi)
        if g < delta:
            return eflow.ElectricalSolution(f, pi, g, sol.iterations, sol.tau, sol.recomputes,
                                            sol.fallback, sol.history)
        tol /= 4
    raise SolverError("exact electrical repair did not certify the requested gap")


def primal_step(x, x_hat, lam=LAMBDA):
    """``x * (1 - lam * x_hat / max(1, ||x_hat||_inf))``."""
    norm = max(abs(v) for v in x_hat) if x.dtype == object else float(np.abs(x_hat).max(initial=0))
    scale = lam / max(1, norm)
    if x.dtype != object:
        scale = float(scale)
    return x * (1 - scale * x_hat)


def dual_step(aux, point: InteriorPoint, pi):
    """``y + mu pi`` with ``mu = x^T s / q``; slacks recomputed from ``y``."""
    mu = point.duality_gap / point.q
    y = point.y + mu * pi
    return y, adjoint_slacks(aux, y)


def _check_interior(x, s, where: str):
    if np.any(x <= 0):
        raise NumericAlarm(f"{where}: nonpositive flow")
    if np.any(s <= 0):
        raise NumericAlarm(f"{where}: nonpositive slack")


def reduce_gap(aux: AuxiliaryNetwork, point: InteriorPoint, target_gap: float = TARGET_GAP,
               delta: float = DELTA, rng: np.random.Generator | None = None, *,
               backend: str = eflow.NAIVE, cap_multiplier: float = 200.0,
               track_potential: bool = True, max_iterations: int | None = None,
               trace: Callable[[dict], None] | None = None) -> IPMResult:
    """Iterate until ``x^T s < target_gap``.

    Requires ``0 < target_gap <= 1``, ``delta <= 1/8`` and at least four
    auxiliary arcs.  More than ``128 * P0`` iterations (numeric trouble) is
    a :class:`SolverError`; a potential increase is a :class:`NumericAlarm`.
    ``max_iterations`` stops early without error (used for partial exact runs).

    Float points run through compiled kernels; exact points take the
    step-by-step route of :func:`project`, :func:`primal_step` and
    :func:`dual_step`.
    """
    if not 0 < target_gap <= 1:
        raise ValueError("target_gap must lie in (0, 1]")
    if not 0 < delta <= DELTA:
        raise ValueError("delta must lie in (0, 1/8]")
    if aux.arc_count < 4:
        raise ValueError("the potential-reduction loop needs at least 4 arcs")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(0))
    backend = eflow.BACKEND_ALIASES[backend]
    _check_interior(point.x, point.s, "initial point")
    p0 = potential(point.x, point.s, point.q) if track_potential else None
    loop = _exact_loop if point.exact else _float_loop
    return loop(aux, point, target_gap, delta, rng, backend, cap_multiplier, p0,
                max_iterations, trace)


class _Tracker:
    def __init__(self, q, p0, trace):
        self.q = q
        self.pot = p0
        self.budget = None if p0 is None else max(128 * p0, 64)
        self.trace = trace
        self.records: list[StepRecord] = []

    def check_budget(self, it):
        if self.budget is not None and it >= self.budget:
            raise SolverError(f"iteration budget {self.budget:.0f} exceeded")

    def step(self, it, kind, x, s, z2, eflow_iterations, ratio):
        _check_interior(x, s, f"{kind} step {it}")
        before = self.pot
        if before is not None:
            self.pot = potential(x, s, self.q)
            if self.pot > before + _TOL:
                raise NumericAlarm(f"potential increased on {kind} step {it}: {before} -> {self.pot}")
        self._append(StepRecord(it, kind, float((x * s).sum()), before, self.pot, float(z2),
                                eflow_iterations, float(ratio)))

    def record(self, it, kind, gap, after, z2, eflow_iterations, ratio):
        """Log a step already checked by the compiled loop."""
        before, self.pot = self.pot, after
        self._append(StepRecord(it, kind, float(gap), before, after, float(z2),
                                eflow_iterations, float(ratio)))

    def _append(self, rec):
        self.records.append(rec)
        if self.trace is not None:
            self.trace(rec.as_json())


def _snap(v) -> np.ndarray:
    return np.array([Fraction(float(e)) for e in v], dtype=object)


def _snap_circulation(aux, d) -> np.ndarray:
    """Round a circulation to doubles off a fixed tree, then restore ``A d = 0`` exactly.

    Keeps exact iterates dyadic with bounded size; exact steps would double
    the digit count of ``x`` on every primal step.
    """
    indptr, adj = _adjacency(aux)
    m = len(aux.tail)
    net = eflow.ResistiveNetwork(aux.node_count, aux.tail, aux.head,
                                 np.array([Fraction(1)] * m, dtype=object),
                                 np.array([Fraction(0)] * aux.node_count, dtype=object),
                                 indptr, adj)
    tree = eflow.build_spanning_tree(net, root=0)
    return eflow.tree_flow(net, tree, _snap(d))


def _exact_loop(aux, point, target_gap, delta, rng, backend, cap_multiplier, p0,
                max_iterations, trace) -> IPMResult:
    tracker = _Tracker(point.q, p0, trace)
    current = point
    it = 0
    while current.duality_gap >= target_gap:
        if max_iterations is not None and it >= max_iterations:
            break
        tracker.check_budget(it)
        proj = project(aux, current, rng, delta, backend=backend, cap_multiplier=cap_multiplier)
        if np.any(proj.sources != apply_incidence(aux, proj.flow)):
            raise NumericAlarm("exact electrical flow violates conservation")
        x, y, s = current.x, current.y, current.s
        if proj.z2 >= Fraction(1, 4):
            kind = PRIMAL
            x_new = x - _snap_circulation(aux, x - primal_step(x, proj.x_hat))
            ratio = min(x_new / x)
            current = InteriorPoint(x_new, y, s, current.p, current.q, current.t, current.gamma)
        else:
            kind = DUAL
            mu = current.duality_gap / current.q
            y_new, s_new = dual_step(aux, current, _snap(mu * proj.voltages) / mu)
            ratio = 1
            current = InteriorPoint(x, y_new, s_new, current.p, current.q, current.t,
                                    current.gamma)
        it += 1
        tracker.step(it, kind, current.x, current.s, proj.z2, proj.electrical.iterations, ratio)
    return IPMResult(current, it, p0, tracker.records)


_CHUNK = 4096


def _float_loop(aux, point, target_gap, delta, rng, backend, cap_multiplier, p0,
                max_iterations, trace) -> IPMResult:
    n, m = aux.node_count, aux.arc_count
    tail, head = aux.tail, aux.head
    cost = aux.cost.astype(float)
    indptr, adj = _adjacency(aux)
    x = np.array(point.x, dtype=float)
    y = np.array(point.y, dtype=float)
    s = np.array(point.s, dtype=float)
    q = point.q
    g, r, f = np.empty(m), np.empty(m), np.empty(m)
    chi, pi = np.empty(n), np.empty(n)
    hist = np.empty((eflow.HISTORY_ROWS, 3))
    info = np.zeros(5)
    out = np.zeros(7)
    rec = np.empty((_CHUNK, 7))
    tracker = _Tracker(q, p0, trace)
    limit = math.inf if max_iterations is None else max_iterations
    if tracker.budget is not None:
        limit = min(limit, math.ceil(tracker.budget))
    it = 0
    while True:
        out[4] = 0
        allowed = int(min(_CHUNK, limit - it))
        code = K.jitted("ipm_run")(
            n, tail, head, cost, x, y, s, q, indptr, adj, rng, float(delta),
            float(cap_multiplier), backend == eflow.TREE, float(target_gap), allowed,
            p0 is not None, 0.0 if tracker.pot is None else float(tracker.pot),
            g, r, chi, f, pi, hist, info, out, rec)
        for row in rec[: int(out[4])]:
            it += 1
            tracker.record(it, PRIMAL if row[0] == 0 else DUAL, row[1],
                           None if np.isnan(row[3]) else float(row[3]), row[4], int(row[5]),
                           row[6])
        if code == 0:
            break
        if code == 1:
            if it >= limit and max_iterations is not None and it >= max_iterations:
                break
            tracker.check_budget(it)
            continue
        if code == 2:
            network = eflow.ResistiveNetwork(n, tail, head, r.copy(), chi.copy(), indptr, adj)
            sol = eflow._compiled_result(network, int(out[6]), f, pi, hist, info, None)
            f[:], pi[:] = sol.flow, sol.voltages
            K.jitted("ipm_apply")(n, tail, head, cost, x, y, s, q, float(out[5]), g, chi, f, pi, out)
            code = 3 if out[3] > 1e-6 * max(float(np.abs(chi).max()), 1.0) else 0
            if code == 0:
                it += 1
                tracker.step(it, PRIMAL if out[0] == 0 else DUAL, x, s, out[1], sol.iterations,
                             out[2])
                continue
        if code == 3:
            raise NumericAlarm(f"electrical flow violates conservation by {out[3]:.3g}")
        if code == 4:
            raise NumericAlarm(f"step {it + 1}: iterate left the interior")
        raise NumericAlarm(f"potential increased on step {it}")
    final = InteriorPoint(x, y, s, point.p, q, point.t, point.gamma)
    return IPMResult(final, it, p0, tracker.records)
