"""Mandated path preferences: MED-based derivation and suffix closure.

A mandated pair (p, q) for a prefix means p must be made strictly lighter
than q. MED is only decisive between routes from the same neighbor AS with
differing MED values; every other comparison is left to the IGP distance,
which the repair is free to set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .netmodel import NetworkInstance, ParseError, ValidationError
from .paths import RoutePath, enumerate_paths, is_empty, suffixes

PrefPair = tuple[RoutePath, RoutePath]


@dataclass(frozen=True)
class ExternalRoute:
    prefix: str
    egress: str
    neighbor_as: str
    med: int

    def __post_init__(self) -> None:
        if self.med < 0:
            raise ValidationError(f"negative MED on route {self.prefix}@{self.egress}")


@dataclass(frozen=True)
class MandatedPreferences:
    """Per-prefix preferred-path pairs and their suffix closure.

    pairs[prefix] holds ordered pairs (p, q): p is mandated lighter than q.
    closure[prefix] (filled by close_suffixes) holds every mandated path and
    all of its suffixes, including the empty paths at their end nodes.
    egresses[prefix] records the border nodes carrying external routes, used
    by the simulator to anchor empty paths.
    """

    pairs: Mapping[str, frozenset[PrefPair]]
    egresses: Mapping[str, frozenset[str]]
    closure: Mapping[str, frozenset[RoutePath]] = field(default_factory=dict)

    def prefixes(self) -> list[str]:
        return sorted(self.pairs)

    def all_pairs(self) -> list[tuple[str, PrefPair]]:
        out = []
        for pfx in self.prefixes():
            out.extend((pfx, pair) for pair in sorted(self.pairs[pfx]))
        return out

    def is_closed(self) -> bool:
        return set(self.closure) == set(self.pairs)

    def validate(self) -> None:
        for pfx, pairs in self.pairs.items():
            for p, q in pairs:
                if p == q:
                    raise ValidationError(f"prefix {pfx}: pair ({p}, {q}) is reflexive")
                if p[0] != q[0]:
                    raise ValidationError(
                        f"prefix {pfx}: pair {p} vs {q} lacks a common source"
                    )
                if (q, p) in pairs:
                    raise ValidationError(
                        f"prefix {pfx}: both orientations mandated for {p}, {q}"
                    )


def preferences_from_pairs(
    pairs: Mapping[str, Iterable[PrefPair]],
    egresses: Mapping[str, Iterable[str]] | None = None,
) -> MandatedPreferences:
    """Build (and close) preferences supplied directly as path pairs."""
    pmap = {pfx: frozenset(v) for pfx, v in pairs.items()}
    if egresses is None:
        egresses = {
            pfx: {pp[-1] for pair in v for pp in pair} for pfx, v in pmap.items()
        }
    prefs = MandatedPreferences(pmap, {pfx: frozenset(v) for pfx, v in egresses.items()})
    prefs.validate()
    return close_suffixes(prefs)


def close_suffixes(prefs: MandatedPreferences) -> MandatedPreferences:
    """Least suffix-closed superset of the mandated paths, per prefix."""
    closure: dict[str, frozenset[RoutePath]] = {}
    for pfx, pairs in prefs.pairs.items():
        paths: set[RoutePath] = set()
        for p, q in pairs:
            for r in (p, q):
                paths.update(suffixes(r))
        # empty paths of every egress are anchors even with no mandates
        paths.update((e,) for e in prefs.egresses.get(pfx, ()))
        closure[pfx] = frozenset(paths)
    return MandatedPreferences(prefs.pairs, prefs.egresses, closure)


def derive_med_preferences(
    inst: NetworkInstance,
    routes: Iterable[ExternalRoute],
    hop_bound: int = 2,
) -> MandatedPreferences:
    """Mandated pairs implied by MED: per prefix and per source node, every
    candidate path to a strictly-lower-MED egress is preferred to every
    candidate path to a higher-MED egress of the same neighbor AS.

    Candidate paths are the simple paths up to hop_bound. Pairs never involve
    an empty path: a mandate against the zero-weight empty path is not
    realizable by link weights, and the egress's own route wins locally
    anyway. Paths through the same egress generate no mandate (MED is never
    decisive there).
    """
    routes = list(routes)
    nodes = set(inst.nodes)
    for r in routes:
        if r.egress not in nodes:
            raise ValidationError(f"route egress {r.egress!r} not in instance")
    by_prefix: dict[str, list[ExternalRoute]] = {}
    for r in routes:
        by_prefix.setdefault(r.prefix, []).append(r)

    pairs: dict[str, frozenset[PrefPair]] = {}
    egresses: dict[str, frozenset[str]] = {}
    for pfx, rts in by_prefix.items():
        egresses[pfx] = frozenset(r.egress for r in rts)
        cand: dict[str, list[RoutePath]] = {
            e: enumerate_paths(inst, e, hop_bound) for e in egresses[pfx]
        }
        found: set[PrefPair] = set()
        for i, r1 in enumerate(rts):
            for r2 in rts[i + 1 :]:
                if r1.neighbor_as != r2.neighbor_as or r1.med == r2.med:
                    continue
                better, worse = (r1, r2) if r1.med < r2.med else (r2, r1)
                if better.egress == worse.egress:
                    continue
                for p in cand[better.egress]:
                    if is_empty(p):
                        continue
                    for q in cand[worse.egress]:
                        if is_empty(q) or p[0] != q[0] or p == q:
                            continue
                        found.add((p, q))
        pairs[pfx] = frozenset(found)
    prefs = MandatedPreferences(pairs, egresses)
    prefs.validate()
    return close_suffixes(prefs)


def load_routes(path: str) -> list[ExternalRoute]:
    """Route CSV: prefix,egress,neighbor_as,med (header optional)."""
    out: list[ExternalRoute] = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() == "prefix":
                    continue
                if len(row) != 4:
                    raise ParseError(f"route row needs 4 fields: {row}")
                out.append(
                    ExternalRoute(row[0].strip(), row[1].strip(), row[2].strip(), int(row[3]))
                )
    except OSError as exc:
        raise ParseError(f"cannot read routes {path}: {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"malformed routes {path}: {exc}") from exc
    return out


def _parse_path(field_: str) -> RoutePath:
    nodes = tuple(field_.split())
    if not nodes:
        raise ParseError("empty path field")
    return nodes


def load_pref_pairs(path: str) -> MandatedPreferences:
    """Direct preference CSV: prefix,p_nodes,q_nodes with space-separated
    node sequences (p preferred to q)."""
    pairs: dict[str, set[PrefPair]] = {}
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().lower() == "prefix":
                    continue
                if len(row) != 3:
                    raise ParseError(f"preference row needs 3 fields: {row}")
                pairs.setdefault(row[0].strip(), set()).add(
                    (_parse_path(row[1]), _parse_path(row[2]))
                )
    except OSError as exc:
        raise ParseError(f"cannot read preferences {path}: {exc}") from exc
    return preferences_from_pairs(pairs)


def save_pref_pairs(prefs: MandatedPreferences, path: str) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["prefix", "p_nodes", "q_nodes"])
        for pfx, (p, q) in prefs.all_pairs():
            wr.writerow([pfx, " ".join(p), " ".join(q)])
