import numpy as np
import pytest
from hypothesis import settings

from cprflow.core import ProblemInstance
from cprflow.eflow import ResistiveNetwork

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def single_arc():
    """One arc 1->2 with u=3, c=2 and one unit of demand."""
    return ProblemInstance(2, tail=[0], head=[1], demand=[-1, 1], cost=[2], capacity=[3])


@pytest.fixture
def single_arc_cost5():
    return ProblemInstance(2, tail=[0], head=[1], demand=[-1, 1], cost=[5], capacity=[3])


def make_network(n, arcs, r=None, chi=None):
    tail = np.array([a for a, _ in arcs], dtype=np.int64)
    head = np.array([b for _, b in arcs], dtype=np.int64)
    r = np.ones(len(arcs)) if r is None else np.asarray(r, dtype=float)
    chi = np.zeros(n) if chi is None else np.asarray(chi, dtype=float)
    return ResistiveNetwork(n, tail, head, r, chi)


def random_network(rng, n, extra, exact=False):
    """Connected random network with balanced random sources."""
    arcs = [(int(rng.integers(v)), v) for v in range(1, n)]
    for _ in range(extra):
        v, w = rng.choice(n, size=2, replace=False)
        arcs.append((int(v), int(w)))
    arcs = [(w, v) if rng.random() < 0.5 else (v, w) for v, w in arcs]
    r = rng.uniform(0.1, 10.0, size=len(arcs))
    chi = rng.normal(size=n)
    chi -= chi.mean()
    return make_network(n, arcs, r, chi)


def certified_point(instance, seed=0, target_gap=0.5):
    """Auxiliary network of a reduced, connected instance and potentials with gap < target.

    Returns ``None`` when the instance reduces to a terminal status, is
    disconnected, or is too small for the interior-point loop.
    """
    from cprflow import ipm
    from cprflow.core import weak_components
    from cprflow.init import balance_arcs
    from cprflow.preprocess import reduce_instance

    red = reduce_instance(instance)
    if red.status is not None or red.instance.arc_count < 2:
        return None
    if weak_components(red.instance)[0] != 1:
        return None
    aux, start = balance_arcs(red.instance)
    res = ipm.reduce_gap(aux, start.to_float(), target_gap, ipm.DELTA,
                         np.random.Generator(np.random.Philox(seed)))
    return red.instance, aux, res
