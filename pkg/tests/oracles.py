"""Independent reference implementations used as test oracles.

Everything here is deliberately written against a different algorithmic
route than the package (exhaustive enumeration, scipy.sparse.csgraph) so
agreement between the two is meaningful evidence, not a tautology.
"""

from __future__ import annotations

import itertools
from typing import Mapping, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as csgraph_dijkstra

from igpfix.bgp_prefs import MandatedPreferences
from igpfix.netmodel import LinkKey, NetworkInstance, link_key
from igpfix.paths import path_weight
from igpfix.repair import FeasibilitySystem, RepairConfig


def csgraph_distances(
    inst: NetworkInstance, w: Mapping[LinkKey, int]
) -> dict[str, dict[str, float]]:
    """All-pairs shortest distances via scipy's csgraph Dijkstra."""
    idx = {v: i for i, v in enumerate(inst.nodes)}
    n = len(inst.nodes)
    mat = np.zeros((n, n))
    for k in inst.link_keys():
        a, b = idx[k[0]], idx[k[1]]
        mat[a, b] = mat[b, a] = w[k]
    dist = csgraph_dijkstra(csr_matrix(mat), directed=False)
    return {u: {v: float(dist[idx[u], idx[v]]) for v in inst.nodes} for u in inst.nodes}


def mandates_feasible(
    prefs: MandatedPreferences, w: Mapping[LinkKey, int], w_max: int
) -> bool:
    """Every mandated gap realizable as a legal virtual weight in [1, w_max]."""
    for _, (p, q) in prefs.all_pairs():
        gap = path_weight(q, w) - path_weight(p, w)
        if not 1 <= gap <= w_max:
            return False
    return True


def brute_force_min_change(
    sys: FeasibilitySystem,
    prefs: MandatedPreferences,
    w_initial: Mapping[LinkKey, Optional[int]],
    cfg: RepairConfig,
) -> Optional[float]:
    """Exhaustive minimum change cost over all weight vectors on the
    constrained links; None when no assignment is feasible."""
    eps, big_m, w_max = cfg.resolved(sys, max(len(w_initial), 1))
    lo = max(cfg.min_weight, 0)
    best = None
    for combo in itertools.product(range(lo, w_max + 1), repeat=len(sys.links)):
        w = dict(zip(sys.links, combo))
        if not mandates_feasible(prefs, w, w_max):
            continue
        cost = 0
        for k, v in w.items():
            init = w_initial.get(k)
            if init is None:
                continue
            d = v - init
            cost += d * d if abs(d) < eps else big_m
        if best is None or cost < best:
            best = cost
    return None if best is None else float(best)


def enum_equal_split_loads(
    inst: NetworkInstance,
    w: Mapping[LinkKey, int],
    dest: str,
    demand: Mapping[str, float],
) -> dict[tuple[str, str], float]:
    """Equal-split loads toward dest computed from first principles.

    Distances come from scipy csgraph; flow is pushed node by node in order
    of decreasing distance, splitting each node's accumulated inflow evenly
    over its distance-decreasing neighbors.
    """
    all_dist = csgraph_distances(inst, w)
    dist = {v: all_dist[v][dest] for v in inst.nodes}
    inflow = {v: float(demand.get(v, 0.0)) for v in inst.nodes}
    loads: dict[tuple[str, str], float] = {}
    for u in sorted(inst.nodes, key=lambda v: -dist[v]):
        if inflow[u] <= 0 or u == dest:
            continue
        hops = [
            v for v in inst.neighbors(u)
            if dist[u] == w[link_key(u, v)] + dist[v]
        ]
        assert hops, f"node {u} has demand but no downhill neighbor"
        share = inflow[u] / len(hops)
        for v in hops:
            loads[(u, v)] = loads.get((u, v), 0.0) + share
            inflow[v] += share
    return loads


def enum_ecmp_cost(inst, w, entries, model) -> float:
    """Equal-split TE cost from first principles: per-destination enumeration
    loads aggregated per directed arc, then the convex penalty applied once."""
    agg: dict[tuple[str, str], float] = {}
    for dest in sorted({d for (_, d) in entries}):
        demand: dict[str, float] = {}
        for (s, d), mbps in entries.items():
            if d == dest:
                demand[s] = demand.get(s, 0.0) + mbps
        for arc, x in enum_equal_split_loads(inst, w, dest, demand).items():
            agg[arc] = agg.get(arc, 0.0) + x
    return sum(
        model.phi(x, model.capacities[link_key(u, v)]) for (u, v), x in agg.items()
    )


def random_small_instance(seed: int, n_lo: int = 4, n_hi: int = 8, w_max: int = 16):
    """Connected random instance: spanning tree plus a few chords."""
    import random as _random

    from igpfix.netmodel import Link, NetworkInstance

    rng = _random.Random(seed)
    n = rng.randint(n_lo, n_hi)
    names = [f"v{i}" for i in range(n)]
    links = set()
    for i in range(1, n):
        links.add(link_key(names[i], names[rng.randrange(i)]))
    extra = rng.randint(1, max(1, n // 2))
    for _ in range(extra * 3):
        if len(links) >= n - 1 + extra:
            break
        a, b = rng.sample(names, 2)
        links.add(link_key(a, b))
    cap = 10000.0
    return NetworkInstance(
        tuple(names), tuple(Link(a, b, None, cap) for a, b in sorted(links)), w_max
    )
