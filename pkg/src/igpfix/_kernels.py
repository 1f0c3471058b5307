"""Hot numeric kernels: Dijkstra, ECMP load propagation, protocol stepping.

Each kernel has a pure-Python/NumPy implementation that numba JIT-compiles
when available. Set IGPFIX_NO_NUMBA=1 to force the fallback path (used by the
benchmark in benchmarks/bench_kernels.py to compare both).
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("IGPFIX_NO_NUMBA", "") not in ("1", "true", "yes")


def _dijkstra_py(adj_ptr, adj_node, adj_link, wlink, dest):
    """Distances from every node to dest over undirected link weights.

    O(n^2) selection loop; n stays small (<= a few hundred nodes) and the
    quadratic form JIT-compiles to something faster than a Python heap.
    """
    n = adj_ptr.shape[0] - 1
    dist = np.full(n, np.inf)
    done = np.zeros(n, np.bool_)
    dist[dest] = 0.0
    for _ in range(n):
        u = -1
        best = np.inf
        for v in range(n):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u < 0:
            break
        done[u] = True
        for k in range(adj_ptr[u], adj_ptr[u + 1]):
            v = adj_node[k]
            nd = best + wlink[adj_link[k]]
            if nd < dist[v]:
                dist[v] = nd
    return dist


def _ecmp_loads_py(adj_ptr, adj_node, adj_link, wlink, dist, demand):
    """Equal-split loads toward one destination.

    Arc k (u -> adj_node[k]) is an ECMP next hop iff
    dist[u] == wlink + dist[v]. Flow is pushed farthest-first so every node's
    inflow is complete before it splits. Returns per-arc loads plus the
    demand volume stranded at unreachable nodes.
    """
    n = adj_ptr.shape[0] - 1
    loads = np.zeros(adj_node.shape[0])
    inflow = demand.astype(np.float64).copy()
    order = np.argsort(dist)
    stranded = 0.0
    for idx in range(n - 1, -1, -1):
        u = order[idx]
        if inflow[u] <= 0.0:
            continue
        if not np.isfinite(dist[u]):
            stranded += inflow[u]
            continue
        if dist[u] == 0.0:
            continue  # destination absorbs
        cnt = 0
        for k in range(adj_ptr[u], adj_ptr[u + 1]):
            if dist[u] == wlink[adj_link[k]] + dist[adj_node[k]]:
                cnt += 1
        if cnt == 0:
            stranded += inflow[u]
            continue
        share = inflow[u] / cnt
        for k in range(adj_ptr[u], adj_ptr[u + 1]):
            v = adj_node[k]
            if dist[u] == wlink[adj_link[k]] + dist[v]:
                loads[k] += share
                inflow[v] += share
    return loads, stranded


def _simulate_py(order_ptr, order_path, path_next, path_tail, node_cyclic,
                 dom_ptr, dom_path, sched, window, traj, max_steps):
    """Run the selection dynamics; record the full trajectory.

    A path is available when its immediate suffix is the current selection
    of its next hop (empty paths, next hop -1, are always available at their
    own node). A node whose preference relation is a (total) order adopts
    the first available path of its best-first order list. A node whose
    pairwise relation is cyclic has no best path: it behaves like the real
    decision process and switches relative to its incumbent — if any
    available path beats the current one (dom_ptr/dom_path list the beaters
    of each path) it adopts the first such, otherwise it keeps the incumbent;
    with no usable incumbent it takes the first available path of its list.
    Returns (converged, steps, changes) where changes[t] marks steps that
    altered a selection. Convergence: no change across 2*window steps.
    """
    n = order_ptr.shape[0] - 1
    sel = np.full(n, -1, np.int32)
    changes = np.zeros(max_steps, np.bool_)
    last_change = -1
    steps = 0
    for t in range(max_steps):
        node = sched[t]
        new = -1
        cur = sel[node]
        if node_cyclic[node] and cur >= 0:
            nh = path_next[cur]
            if nh < 0 or sel[nh] == path_tail[cur]:
                new = cur
                for j in range(dom_ptr[cur], dom_ptr[cur + 1]):
                    q = dom_path[j]
                    nq = path_next[q]
                    if nq < 0 or sel[nq] == path_tail[q]:
                        new = q
                        break
        if new < 0:
            for k in range(order_ptr[node], order_ptr[node + 1]):
                p = order_path[k]
                nh = path_next[p]
                if nh < 0 or sel[nh] == path_tail[p]:
                    new = p
                    break
        if new != sel[node]:
            sel[node] = new
            last_change = t
            changes[t] = True
        traj[t, :] = sel
        steps = t + 1
        if t - last_change >= 2 * window:
            return True, steps, changes
    return False, steps, changes


if USE_NUMBA:
    _dijkstra_jit = numba.njit(cache=True)(_dijkstra_py)
    _ecmp_loads_jit = numba.njit(cache=True)(_ecmp_loads_py)
    _simulate_jit = numba.njit(cache=True)(_simulate_py)
    dijkstra = _dijkstra_jit
    ecmp_loads = _ecmp_loads_jit
    simulate_run = _simulate_jit
else:
    dijkstra = _dijkstra_py
    ecmp_loads = _ecmp_loads_py
    simulate_run = _simulate_py

# Both variants stay importable for the benchmark harness.
IMPLEMENTATIONS = {
    "python": {
        "dijkstra": _dijkstra_py,
        "ecmp_loads": _ecmp_loads_py,
        "simulate_run": _simulate_py,
    }
}
if USE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "dijkstra": _dijkstra_jit,
        "ecmp_loads": _ecmp_loads_jit,
        "simulate_run": _simulate_jit,
    }
