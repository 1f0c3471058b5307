"""Ready-made problem instances: the 6-node two-prefix conflict used by the
validation tests, injected MED conflict patterns, and random mandated
preferences for the scaling benchmark."""

from __future__ import annotations

import random
from typing import Optional

from .bgp_prefs import ExternalRoute, MandatedPreferences, preferences_from_pairs
from .netmodel import Link, NetworkInstance, ValidationError
from .paths import RoutePath
from .repair import build_system, solve_relaxed

_CAP = 10000.0


def two_prefix_med(w_max: int = 16) -> tuple[NetworkInstance, list[ExternalRoute]]:
    """Six-router instance with two prefixes subject to the MED pattern.

    Two reflector clusters: A and B hang off R, C and T hang off S, with an
    R-S-T triangle providing alternative internal paths. Each prefix is
    advertised by one external AS at both A and B with differing MEDs
    (B's route carries the lower MED, so B-egress paths are mandated better)
    and by an unrelated AS at a third router with MED 0. Link weights are
    left unknown; tests sample them.
    """
    nodes = ("A", "B", "C", "R", "S", "T")
    links = tuple(
        Link(a, b, None, _CAP)
        for a, b in [("R", "A"), ("R", "B"), ("R", "S"), ("S", "C"), ("S", "T"), ("R", "T")]
    )
    inst = NetworkInstance(nodes, links, w_max)
    routes = [
        ExternalRoute("pfx1", "B", "as100", 10),
        ExternalRoute("pfx1", "A", "as100", 20),
        ExternalRoute("pfx1", "C", "as200", 0),
        ExternalRoute("pfx2", "B", "as300", 10),
        ExternalRoute("pfx2", "A", "as300", 20),
        ExternalRoute("pfx2", "T", "as400", 0),
    ]
    return inst, routes


def inject_med_conflicts(
    inst: NetworkInstance, k: int, seed: int = 0
) -> list[ExternalRoute]:
    """k independent MED conflict patterns on random routers.

    Each pattern advertises one prefix from two external ASes: the first AS
    reaches two random routers with MEDs 10 and 20, the second reaches a
    third router with MED 0.
    """
    if len(inst.nodes) < 3:
        raise ValidationError("need at least 3 nodes to inject a MED conflict")
    rng = random.Random(seed)
    routes: list[ExternalRoute] = []
    for i in range(k):
        e1, e2, e3 = rng.sample(list(inst.nodes), 3)
        pfx = f"p{i}"
        routes += [
            ExternalRoute(pfx, e1, f"ext{2 * i}", 10),
            ExternalRoute(pfx, e2, f"ext{2 * i}", 20),
            ExternalRoute(pfx, e3, f"ext{2 * i + 1}", 0),
        ]
    return routes


def _random_path(inst: NetworkInstance, rng: random.Random, max_len: int) -> RoutePath:
    """Random simple path: a loop-free random walk of random length."""
    path = [rng.choice(inst.nodes)]
    target = rng.randint(1, max_len)
    while len(path) - 1 < target:
        cand = [v for v in inst.neighbors(path[-1]) if v not in path]
        if not cand:
            break
        path.append(rng.choice(cand))
    return tuple(path)


def random_pref_paths(
    inst: NetworkInstance,
    n_paths: int = 40,
    n_prefs: Optional[int] = None,
    seed: int = 0,
    max_len: int = 4,
    max_attempts: int = 50,
    prefix: str = "bench",
) -> MandatedPreferences:
    """Random mandated preferences for scaling runs.

    Draws n_paths random simple paths; every unordered pair sharing a source
    node gets a uniformly random preference direction (or, with probability
    1/3, none). Redraws when the induced constraint system is infeasible
    (random directions can be cyclic). n_prefs trims the pair count.
    """
    rng = random.Random(seed)
    for _ in range(max_attempts):
        paths: set[RoutePath] = set()
        tries = 0
        while len(paths) < n_paths and tries < 20 * n_paths:
            tries += 1
            p = _random_path(inst, rng, max_len)
            if len(p) > 1:
                paths.add(p)
        by_source: dict[str, list[RoutePath]] = {}
        for p in sorted(paths):
            by_source.setdefault(p[0], []).append(p)
        pairs: list[tuple[RoutePath, RoutePath]] = []
        for src in sorted(by_source):
            ps = by_source[src]
            for i, p in enumerate(ps):
                for q in ps[i + 1 :]:
                    r = rng.random()
                    if r < 1 / 3:
                        continue  # neither is required to be preferred
                    pairs.append((p, q) if r < 2 / 3 else (q, p))
        rng.shuffle(pairs)
        if n_prefs is not None:
            pairs = pairs[:n_prefs]
        if not pairs:
            continue
        try:
            prefs = preferences_from_pairs({prefix: set(pairs)})
        except ValidationError:
            continue
        sys = build_system(inst, prefs)
        if solve_relaxed(sys, {k: None for k in inst.link_keys()}) is not None:
            return prefs
    raise ValidationError(
        f"no feasible random preference set after {max_attempts} attempts"
    )
