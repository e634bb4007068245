"""Array kernels for spanning trees and cycle updates.

Each kernel is plain Python over numpy arrays.  ``jitted`` returns the
numba-compiled twin for float64 work; the uncompiled function serves exact
(object-dtype) arrays.
"""

from __future__ import annotations

import types

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None


def kruskal(n, tail, head, r, in_tree):
    order = np.argsort(r)
    comp = np.arange(n)
    picked = 0
    for k in range(len(order)):
        a = order[k]
        u = tail[a]
        while comp[u] != u:
            comp[u] = comp[comp[u]]
            u = comp[u]
        v = head[a]
        while comp[v] != v:
            comp[v] = comp[comp[v]]
            v = comp[v]
        if u != v:
            comp[u] = v
            in_tree[a] = True
            picked += 1
            if picked == n - 1:
                break
    return picked


def _heap_push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] < keys[i] or (keys[p] == keys[i] and vals[p] <= vals[i]):
            break
        keys[p], keys[i] = keys[i], keys[p]
        vals[p], vals[i] = vals[i], vals[p]
        i = p
    return size + 1


def _heap_pop(keys, vals, size):
    """Remove the root; the popped pair is left at index ``size - 1``."""
    size -= 1
    keys[0], keys[size] = keys[size], keys[0]
    vals[0], vals[size] = vals[size], vals[0]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and (keys[c + 1] < keys[c] or (keys[c + 1] == keys[c] and vals[c + 1] < vals[c])):
            c += 1
        if keys[i] < keys[c] or (keys[i] == keys[c] and vals[i] <= vals[c]):
            break
        keys[c], keys[i] = keys[i], keys[c]
        vals[c], vals[i] = vals[i], vals[c]
        i = c
    return size


def shortest_path_tree(n, tail, head, r, indptr, adj, root, in_tree):
    """Dijkstra under lengths ``r`` with an array heap and lazy deletion."""
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    via = np.full(n, -1, dtype=np.int64)
    keys = np.empty(len(tail) + 1)
    vals = np.empty(len(tail) + 1, dtype=np.int64)
    dist[root] = 0.0
    size = _heap_push(keys, vals, 0, 0.0, root)
    reached = 0
    while size > 0:
        size = _heap_pop(keys, vals, size)
        d = keys[size]
        v = vals[size]
        if done[v]:
            continue
        done[v] = True
        reached += 1
        if via[v] >= 0:
            in_tree[via[v]] = True
        for k in range(indptr[v], indptr[v + 1]):
            a = adj[k]
            w = head[a] if tail[a] == v else tail[a]
            nd = d + r[a]
            if not done[w] and nd < dist[w]:
                dist[w] = nd
                via[w] = a
                size = _heap_push(keys, vals, size, nd, w)
    return reached - 1


def root_tree(n, tail, head, in_tree, indptr, adj, root, parent, parent_arc, depth, order):
    """BFS over tree arcs; fills parent pointers, depths and BFS order."""
    for v in range(n):
        parent[v] = -1
        parent_arc[v] = -1
        depth[v] = -1
    depth[root] = 0
    order[0] = root
    size = 1
    i = 0
    while i < size:
        v = order[i]
        i += 1
        for k in range(indptr[v], indptr[v + 1]):
            a = adj[k]
            if not in_tree[a]:
                continue
            w = head[a] if tail[a] == v else tail[a]
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                parent[w] = v
                parent_arc[w] = a
                order[size] = w
                size += 1
    return size


def cycle_resistances(tail, head, r, parent, parent_arc, depth, nontree, rc):
    for k in range(len(nontree)):
        a = nontree[k]
        x = tail[a]
        y = head[a]
        total = r[a]
        while depth[x] > depth[y]:
            total += r[parent_arc[x]]
            x = parent[x]
        while depth[y] > depth[x]:
            total += r[parent_arc[y]]
            y = parent[y]
        while x != y:
            total += r[parent_arc[x]] + r[parent_arc[y]]
            x = parent[x]
            y = parent[y]
        rc[k] = total


def tree_flow(tail, head, excess, parent, parent_arc, order, f):
    """Route ``excess`` (consumed in place) over tree arcs by leaf elimination."""
    for i in range(len(order) - 1, 0, -1):
        v = order[i]
        a = parent_arc[v]
        if head[a] == v:
            f[a] = excess[v]
        else:
            f[a] = -excess[v]
        excess[parent[v]] += excess[v]


def tree_voltages(tail, head, r, f, parent, parent_arc, order, pi):
    pi[order[0]] = r[0] * 0
    for i in range(1, len(order)):
        v = order[i]
        a = parent_arc[v]
        if head[a] == v:
            pi[v] = pi[parent[v]] + f[a] * r[a]
        else:
            pi[v] = pi[parent[v]] - f[a] * r[a]


def ohm_residual_energy(tail, head, r, f, pi):
    """``sum_a r_a (f_a - (pi_head - pi_tail) / r_a)^2``."""
    total = f[0] * 0
    for a in range(len(tail)):
        e = f[a] - (pi[head[a]] - pi[tail[a]]) / r[a]
        total += r[a] * e * e
    return total


def naive_updates(tail, head, r, f, parent, parent_arc, depth, rc_arc, seq):
    """Cycle updates walking tree paths to the lowest common ancestor."""
    for k in range(len(seq)):
        a = seq[k]
        v = tail[a]
        w = head[a]
        drop = r[a] * f[a]
        x = v
        y = w
        while depth[x] > depth[y]:
            e = parent_arc[x]
            drop += f[e] * r[e] if head[e] == x else -f[e] * r[e]
            x = parent[x]
        while depth[y] > depth[x]:
            e = parent_arc[y]
            drop -= f[e] * r[e] if head[e] == y else -f[e] * r[e]
            y = parent[y]
        while x != y:
            e = parent_arc[x]
            drop += f[e] * r[e] if head[e] == x else -f[e] * r[e]
            x = parent[x]
            e = parent_arc[y]
            drop -= f[e] * r[e] if head[e] == y else -f[e] * r[e]
            y = parent[y]
        lca = x
        delta = drop / rc_arc[a]
        f[a] -= delta
        x = v
        while x != lca:
            e = parent_arc[x]
            if head[e] == x:
                f[e] -= delta
            else:
                f[e] += delta
            x = parent[x]
        y = w
        while y != lca:
            e = parent_arc[y]
            if tail[e] == y:
                f[e] -= delta
            else:
                f[e] += delta
            y = parent[y]


# ---------------------------------------------------------------------------
# heavy-light decomposition over a lazy segment tree
#
# Tree arc of node x is stored at position pos[x] holding its upward flow
# phi_x (flow in direction x -> parent) weighted by its resistance.  A cycle
# update is two root-path additions; a cycle drop is two root-path sums.


def hld_layout(n, parent, order, chead, pos):
    size = np.ones(n, dtype=np.int64)
    heavy = np.full(n, -1)
    for i in range(n - 1, 0, -1):
        v = order[i]
        p = parent[v]
        size[p] += size[v]
    for i in range(n - 1, 0, -1):
        v = order[i]
        p = parent[v]
        if heavy[p] < 0 or size[v] > size[heavy[p]] or (size[v] == size[heavy[p]] and v < heavy[p]):
            heavy[p] = v
    # children lists in CSR form
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n):
        counts[parent[order[i]] + 1] += 1
    for v in range(n):
        counts[v + 1] += counts[v]
    fill = counts[:n].copy()
    kids = np.empty(max(n - 1, 1), dtype=np.int64)
    for i in range(1, n):
        v = order[i]
        p = parent[v]
        kids[fill[p]] = v
        fill[p] += 1
    root = order[0]
    stack = np.empty(n, dtype=np.int64)
    stack[0] = root
    top = 1
    chead[root] = root
    nxt = 0
    while top > 0:
        top -= 1
        v = stack[top]
        pos[v] = nxt
        nxt += 1
        for k in range(counts[v], counts[v + 1]):
            c = kids[k]
            if c != heavy[v]:
                chead[c] = c
                stack[top] = c
                top += 1
        if heavy[v] >= 0:
            chead[heavy[v]] = chead[v]
            stack[top] = heavy[v]
            top += 1


def _seg_apply(d, lz, wsum, k, size, val):
    d[k] += val * wsum[k]
    if k < size:
        lz[k] += val


def _seg_push(d, lz, wsum, k, size):
    if lz[k] != 0:
        _seg_apply(d, lz, wsum, 2 * k, size, lz[k])
        _seg_apply(d, lz, wsum, 2 * k + 1, size, lz[k])
        lz[k] = lz[k] * 0


def _seg_push_path(d, lz, wsum, l, r, size, log):
    for i in range(log, 0, -1):
        if ((l >> i) << i) != l:
            _seg_push(d, lz, wsum, l >> i, size)
        if ((r >> i) << i) != r:
            _seg_push(d, lz, wsum, (r - 1) >> i, size)


def seg_add(d, lz, wsum, size, log, l, r, val):
    """Add ``val`` to every phi in positions ``[l, r)``."""
    l += size
    r += size
    _seg_push_path(d, lz, wsum, l, r, size, log)
    l2, r2 = l, r
    while l2 < r2:
        if l2 & 1:
            _seg_apply(d, lz, wsum, l2, size, val)
            l2 += 1
        if r2 & 1:
            r2 -= 1
            _seg_apply(d, lz, wsum, r2, size, val)
        l2 >>= 1
        r2 >>= 1
    for i in range(1, log + 1):
        if ((l >> i) << i) != l:
            k = l >> i
            d[k] = d[2 * k] + d[2 * k + 1]
        if ((r >> i) << i) != r:
            k = (r - 1) >> i
            d[k] = d[2 * k] + d[2 * k + 1]


def seg_sum(d, lz, wsum, size, log, l, r):
    """Sum of resistance-weighted phi over positions ``[l, r)``."""
    l += size
    r += size
    _seg_push_path(d, lz, wsum, l, r, size, log)
    total = d[0] * 0
    while l < r:
        if l & 1:
            total += d[l]
            l += 1
        if r & 1:
            r -= 1
            total += d[r]
        l >>= 1
        r >>= 1
    return total


def _path_sum(d, lz, wsum, size, log, parent, chead, pos, x):
    total = d[0] * 0
    while x >= 0:
        h = chead[x]
        total += seg_sum(d, lz, wsum, size, log, pos[h], pos[x] + 1)
        x = parent[h]
    return total


def _path_add(d, lz, wsum, size, log, parent, chead, pos, x, val):
    while x >= 0:
        h = chead[x]
        seg_add(d, lz, wsum, size, log, pos[h], pos[x] + 1, val)
        x = parent[h]


def hld_cycle_updates(tail, head, r, f, parent, chead, pos, d, lz, wsum, size, log, rc_arc, seq):
    for k in range(len(seq)):
        a = seq[k]
        v = tail[a]
        w = head[a]
        drop = (r[a] * f[a]
                - _path_sum(d, lz, wsum, size, log, parent, chead, pos, v)
                + _path_sum(d, lz, wsum, size, log, parent, chead, pos, w))
        delta = drop / rc_arc[a]
        f[a] -= delta
        _path_add(d, lz, wsum, size, log, parent, chead, pos, w, -delta)
        _path_add(d, lz, wsum, size, log, parent, chead, pos, v, delta)


def seg_push_all(d, lz, wsum, size):
    for k in range(1, size):
        _seg_push(d, lz, wsum, k, size)


def seg_build(d, wsum, size):
    for k in range(size - 1, 0, -1):
        d[k] = d[2 * k] + d[2 * k + 1]
        wsum[k] = wsum[2 * k] + wsum[2 * k + 1]


def hld_init(r, f, parent_arc, tail, order, pos, d, wsum, size):
    """Load tree-arc flows (as upward flows weighted by resistance) into the leaves."""
    for i in range(1, len(order)):
        v = order[i]
        a = parent_arc[v]
        up = f[a] if tail[a] == v else -f[a]
        wsum[size + pos[v]] = r[a]
        d[size + pos[v]] = r[a] * up
    seg_build(d, wsum, size)


def hld_sync(f, parent_arc, tail, order, pos, d, lz, wsum, size):
    """Write tree-arc flows held in the segment tree back into ``f``."""
    seg_push_all(d, lz, wsum, size)
    for i in range(1, len(order)):
        v = order[i]
        a = parent_arc[v]
        up = d[size + pos[v]] / wsum[size + pos[v]]
        f[a] = up if tail[a] == v else -up


# ---------------------------------------------------------------------------
# fused float routines


def incidence(n, tail, head, vals, out):
    for v in range(n):
        out[v] = 0.0
    for a in range(len(tail)):
        out[head[a]] += vals[a]
        out[tail[a]] -= vals[a]


def index_tree(n, tail, head, r, in_tree, indptr, adj, root, parent, parent_arc, depth,
               order, nontree, rc):
    """Root the tree and fill non-tree arcs with cycle resistances; returns ``(tau, k)``."""
    size = root_tree(n, tail, head, in_tree, indptr, adj, root, parent, parent_arc, depth, order)
    if size != n:
        return -1.0, -1
    k = 0
    for a in range(len(tail)):
        if not in_tree[a]:
            nontree[k] = a
            k += 1
    cycle_resistances(tail, head, r, parent, parent_arc, depth, nontree[:k], rc[:k])
    tau = 0.0
    for i in range(k):
        tau += rc[i] / r[nontree[i]]
    return tau, k


def electrical_gap(n, tail, head, r, chi, f, pi, buf):
    incidence(n, tail, head, f, buf)
    total = 0.0
    for v in range(n):
        total += pi[v] * (buf[v] - chi[v])
    return ohm_residual_energy(tail, head, r, f, pi) + 2.0 * total


def electrical_solve(n, tail, head, r, chi, indptr, adj, rng, delta, cap_multiplier, use_hld,
                     f, pi, hist, info):
    """Cycle-sampling solve with ``gap < delta``, all in one call.

    Returns a status: 0 done, 1 iteration cap hit (flow is unusable),
    2 negative gap, 3 disconnected.  ``info`` receives
    ``(iterations, gap, tau, recomputes, history length)``; ``hist`` rows
    are ``(iteration, energy, gap)``.
    """
    m = len(tail)
    root = int(rng.random() * n)
    in_tree = np.zeros(m, dtype=np.bool_)
    if kruskal(n, tail, head, r, in_tree) != n - 1:
        return 3
    parent = np.empty(n, dtype=np.int64)
    parent_arc = np.empty(n, dtype=np.int64)
    depth = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    nontree = np.empty(m, dtype=np.int64)
    rc = np.empty(m)
    tau, k = index_tree(n, tail, head, r, in_tree, indptr, adj, root, parent, parent_arc,
                        depth, order, nontree, rc)
    if k > 0:
        in2 = np.zeros(m, dtype=np.bool_)
        shortest_path_tree(n, tail, head, r, indptr, adj, root, in2)
        parent2 = np.empty(n, dtype=np.int64)
        parent_arc2 = np.empty(n, dtype=np.int64)
        depth2 = np.empty(n, dtype=np.int64)
        order2 = np.empty(n, dtype=np.int64)
        nontree2 = np.empty(m, dtype=np.int64)
        rc2 = np.empty(m)
        tau2, k2 = index_tree(n, tail, head, r, in2, indptr, adj, root, parent2, parent_arc2,
                              depth2, order2, nontree2, rc2)
        if tau2 < tau:
            tau, k = tau2, k2
            parent, parent_arc, depth, order = parent2, parent_arc2, depth2, order2
            nontree, rc = nontree2, rc2
    for a in range(m):
        f[a] = 0.0
    excess = chi.copy()
    tree_flow(tail, head, excess, parent, parent_arc, order, f)
    tree_voltages(tail, head, r, f, parent, parent_arc, order, pi)
    buf = np.empty(n)
    gap = electrical_gap(n, tail, head, r, chi, f, pi, buf)
    energy = 0.0
    for a in range(m):
        energy += r[a] * f[a] * f[a]
    hist[0, 0] = 0.0
    hist[0, 1] = energy
    hist[0, 2] = gap
    nh = 1
    info[0] = 0.0
    info[1] = gap
    info[2] = tau
    info[3] = 1.0
    info[4] = 1.0
    if k == 0 or gap < delta:
        return 0
    cap = cap_multiplier * max(tau, 1.0) * max(1.0, np.log(max(gap, delta) / delta) + 1.0)
    cum = np.empty(k)
    acc = 0.0
    for i in range(k):
        acc += rc[i] / r[nontree[i]] / tau
        cum[i] = acc
    rc_arc = np.ones(m)
    for i in range(k):
        rc_arc[nontree[i]] = rc[i]
    seq = np.empty(m, dtype=np.int64)
    if use_hld:
        chead = np.empty(n, dtype=np.int64)
        pos = np.empty(n, dtype=np.int64)
        hld_layout(n, parent, order, chead, pos)
        size = 1
        log = 0
        while size < n:
            size *= 2
            log += 1
        d = np.zeros(2 * size)
        lz = np.zeros(2 * size)
        wsum = np.zeros(2 * size)
        hld_init(r, f, parent_arc, tail, order, pos, d, wsum, size)
    iterations = 0
    recomputes = 1
    while gap >= delta:
        if iterations >= cap:
            info[0] = iterations
            return 1
        total = cum[k - 1]
        for j in range(m):
            idx = np.searchsorted(cum[:k], rng.random() * total, side="right")
            seq[j] = nontree[min(idx, k - 1)]
        if use_hld:
            hld_cycle_updates(tail, head, r, f, parent, chead, pos, d, lz, wsum, size, log,
                              rc_arc, seq)
            hld_sync(f, parent_arc, tail, order, pos, d, lz, wsum, size)
        else:
            naive_updates(tail, head, r, f, parent, parent_arc, depth, rc_arc, seq)
        iterations += m
        tree_voltages(tail, head, r, f, parent, parent_arc, order, pi)
        gap = electrical_gap(n, tail, head, r, chi, f, pi, buf)
        energy = 0.0
        for a in range(m):
            energy += r[a] * f[a] * f[a]
        recomputes += 1
        if nh < hist.shape[0]:
            hist[nh, 0] = iterations
            hist[nh, 1] = energy
            hist[nh, 2] = gap
            nh += 1
        info[0] = iterations
        info[1] = gap
        info[3] = recomputes
        info[4] = nh
        if gap < -1e-9 * max(1.0, energy):
            return 2
    return 0


def ipm_prepare(n, tail, head, x, s, q, g, r, chi):
    """Scaled gradient ``g'``, resistances ``x^-2`` and sources ``A (x * g')``."""
    m = len(tail)
    total = 0.0
    for a in range(m):
        total += x[a] * s[a]
    scale = q / total
    for v in range(n):
        chi[v] = 0.0
    for a in range(m):
        g[a] = x[a] * s[a] * scale - 1.0
        r[a] = 1.0 / (x[a] * x[a])
        val = x[a] * g[a]
        chi[head[a]] += val
        chi[tail[a]] -= val
    return total


def ipm_apply(n, tail, head, cost, x, y, s, q, total, g, chi, f, pi, out):
    """Take the primal or dual step in place.

    ``out[:4]`` receives ``(kind, ||z||^2, min x'/x, conservation residual)``
    with kind 0 primal, 1 dual.
    """
    m = len(tail)
    resid = 0.0
    buf = np.empty(n)
    incidence(n, tail, head, f, buf)
    for v in range(n):
        resid = max(resid, abs(chi[v] - buf[v]))
    z2 = 0.0
    norm = 0.0
    for a in range(m):
        z = g[a] - x[a] * (pi[head[a]] - pi[tail[a]])
        z2 += z * z
        norm = max(norm, abs(g[a] - f[a] / x[a]))
    ratio = 1.0
    if z2 >= 0.25:
        step = 0.25 / max(1.0, norm)
        ratio = np.inf
        for a in range(m):
            factor = 1.0 - step * (g[a] - f[a] / x[a])
            x[a] = x[a] * factor
            ratio = min(ratio, factor)
        out[0] = 0.0
    else:
        mu = total / q
        for v in range(n):
            y[v] = y[v] + mu * pi[v]
        for a in range(m):
            s[a] = cost[a] + y[tail[a]] - y[head[a]]
        out[0] = 1.0
    out[1] = z2
    out[2] = ratio
    out[3] = resid


def log_products(x, s):
    total = 0.0
    logs = 0.0
    for a in range(len(x)):
        v = x[a] * s[a]
        total += v
        logs += np.log(v)
    return total, logs


def ipm_run(n, tail, head, cost, x, y, s, q, indptr, adj, rng, delta, cap_multiplier,
            use_hld, target_gap, max_steps, track, pot, g, r, chi, f, pi, hist, info, out, rec):
    """Float potential-reduction loop; returns an event code for the caller.

    0 target reached, 1 step limit, 2 electrical solve needs help (see
    ``info``), 3 conservation alarm, 4 interiority alarm, 5 potential
    increase.  Each completed step fills one row of ``rec``:
    ``(kind, gap, potential before, potential after, z2, eflow iterations,
    min ratio)``; ``out[4]`` counts the rows.
    """
    m = len(tail)
    mlogm = m * np.log(m)
    steps = 0
    while True:
        total = ipm_prepare(n, tail, head, x, s, q, g, r, chi)
        out[5] = total
        if total < target_gap:
            return 0
        if steps >= max_steps:
            return 1
        status = electrical_solve(n, tail, head, r, chi, indptr, adj, rng, delta,
                                  cap_multiplier, use_hld, f, pi, hist, info)
        if status != 0:
            out[6] = status
            return 2
        ipm_apply(n, tail, head, cost, x, y, s, q, total, g, chi, f, pi, out)
        scale = 0.0
        for v in range(n):
            scale = max(scale, abs(chi[v]))
        if out[3] > 1e-6 * max(scale, 1.0):
            return 3
        for a in range(m):
            if not (x[a] > 0.0 and s[a] > 0.0):
                return 4
        row = int(out[4])
        rec[row, 0] = out[0]
        rec[row, 2] = pot
        rec[row, 4] = out[1]
        rec[row, 5] = info[0]
        rec[row, 6] = out[2]
        total, logs = log_products(x, s)
        rec[row, 1] = total
        if track:
            after = q * np.log(total) - logs - mlogm
            rec[row, 3] = after
            if after > pot + 1e-9:
                out[4] = row + 1
                return 5
            pot = after
        else:
            rec[row, 3] = np.nan
        out[4] = row + 1
        steps += 1


_KERNELS = (
    "_heap_push", "_heap_pop", "_seg_apply", "_seg_push", "_seg_push_path", "seg_add", "seg_sum", "_path_sum",
    "_path_add", "kruskal", "shortest_path_tree", "root_tree", "cycle_resistances",
    "tree_flow", "tree_voltages", "ohm_residual_energy", "naive_updates", "hld_layout",
    "hld_cycle_updates", "seg_push_all", "seg_build", "hld_init", "hld_sync", "incidence",
    "index_tree", "electrical_gap", "electrical_solve", "ipm_prepare", "ipm_apply",
    "log_products", "ipm_run",
)

# Compiled twins live in their own namespace so that the Python originals keep
# calling Python helpers (object arrays cannot enter compiled code).
_jit_namespace = dict(globals())
if numba is not None:
    for _name in _KERNELS:
        _fn = globals()[_name]
        _clone = types.FunctionType(_fn.__code__, _jit_namespace, _name, _fn.__defaults__)
        _jit_namespace[_name] = numba.njit(cache=True)(_clone)


def jitted(name):
    """Compiled kernel ``name`` (the Python original when numba is missing)."""
    return _jit_namespace[name]


def python(name):
    return globals()[name]
