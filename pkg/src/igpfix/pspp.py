"""Partial path-preference instances, path digraphs, safety, rank witnesses.

An instance holds, per node, the permitted paths toward a destination prefix
and a partial preference order on them. The prefix may be reachable through
several egress nodes; the empty path at each egress anchors the structure.
Safety is acyclicity of the path digraph; a rank witness is a numeric
linearization of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .netmodel import ValidationError, link_key
from .paths import RoutePath, immediate_suffix, is_empty, links_of

PrefPair = tuple[RoutePath, RoutePath]


def _transitive_closure(pairs: Iterable[PrefPair]) -> set[PrefPair]:
    closure = set(pairs)
    changed = True
    succ: dict[RoutePath, set[RoutePath]] = {}
    for a, b in closure:
        succ.setdefault(a, set()).add(b)
    while changed:
        changed = False
        for a, bs in list(succ.items()):
            for b in list(bs):
                for c in succ.get(b, ()):
                    if c not in bs:
                        bs.add(c)
                        changed = True
    return {(a, b) for a, bs in succ.items() for b in bs}


@dataclass(frozen=True)
class PsppInstance:
    """Permitted paths with per-node preference relations.

    prefs holds the raw strictly-better relation. It is usually a partial
    order (mandates only) or a total order, but it may be cyclic: the real
    decision process compares some pairs by an external attribute and the
    rest by IGP distance, and nothing forces those verdicts to be mutually
    transitive. A node with a cyclic relation is itself a preference cycle
    and shows up as such in the path digraph.

    mandates marks the subset of prefs pairs that are externally mandated
    (decisive regardless of IGP distance); the simulator's selection rule
    eliminates mandate-dominated paths before comparing the rest.
    """

    destination: str
    egresses: frozenset[str]
    permitted: Mapping[str, tuple[RoutePath, ...]]
    prefs: Mapping[str, frozenset[PrefPair]]  # (p, q): p strictly better than q
    order: Optional[Mapping[str, tuple[RoutePath, ...]]] = None  # IGP-best-first
    mandates: Mapping[str, frozenset[PrefPair]] = field(default_factory=dict)
    _closure: dict = field(default_factory=dict, compare=False, repr=False)
    _cyclic: set = field(default_factory=set, compare=False, repr=False)

    def __post_init__(self) -> None:
        for v, paths in self.permitted.items():
            for p in paths:
                if p[0] != v:
                    raise ValidationError(f"path {p} permitted at {v} but starts at {p[0]}")
                if p[-1] not in self.egresses:
                    raise ValidationError(f"path {p} does not end at an egress")
                if len(set(p)) != len(p):
                    raise ValidationError(f"path {p} is not simple")
        for v, pairs in self.prefs.items():
            for a, b in pairs:
                if a == b:
                    raise ValidationError(f"reflexive preference at {v}: {a}")
                if (b, a) in pairs:
                    raise ValidationError(f"both orientations at {v}: {a} vs {b}")
            closure = _transitive_closure(pairs)
            if any(a != b and (b, a) in closure for a, b in closure):
                self._cyclic.add(v)
            self._closure[v] = closure

    def pref_closure(self, v: str) -> set[PrefPair]:
        return self._closure.get(v, set())

    def is_cyclic_at(self, v: str) -> bool:
        return v in self._cyclic

    def strictly_prefers(self, v: str, p: RoutePath, q: RoutePath) -> bool:
        raw = self.prefs.get(v, frozenset())
        if (p, q) in raw:
            return True
        if (q, p) in raw or v in self._cyclic:
            return False  # cyclic relations contribute raw pairs only
        c = self.pref_closure(v)
        return (p, q) in c and (q, p) not in c

    def all_paths(self) -> list[RoutePath]:
        out: set[RoutePath] = set()
        for paths in self.permitted.values():
            out.update(paths)
        return sorted(out)

    def is_total(self) -> bool:
        for v, paths in self.permitted.items():
            c = self.pref_closure(v)
            for i, p in enumerate(paths):
                for q in paths[i + 1 :]:
                    if (p, q) not in c and (q, p) not in c:
                        return False
        return True

    def restrict(self, keep: Iterable[RoutePath]) -> "PsppInstance":
        """Sub-instance containing only the given paths."""
        keep = set(keep)
        permitted = {
            v: tuple(p for p in paths if p in keep)
            for v, paths in self.permitted.items()
        }
        permitted = {v: ps for v, ps in permitted.items() if ps}
        prefs = {
            v: frozenset((a, b) for a, b in self.prefs.get(v, frozenset())
                         if a in keep and b in keep)
            for v in permitted
        }
        order = None
        if self.order is not None:
            order = {v: tuple(p for p in self.order[v] if p in keep) for v in permitted}
        mandates = {
            v: frozenset((a, b) for a, b in self.mandates.get(v, frozenset())
                         if a in keep and b in keep)
            for v in permitted
        }
        return PsppInstance(self.destination, self.egresses, permitted, prefs, order, mandates)

    def without_node(self, node: str) -> "PsppInstance":
        return self.restrict(p for p in self.all_paths() if node not in p)

    def without_link(self, a: str, b: str) -> "PsppInstance":
        k = link_key(a, b)
        return self.restrict(p for p in self.all_paths() if k not in links_of(p))


def from_total_orders(
    destination: str,
    egresses: Iterable[str],
    order: Mapping[str, Iterable[RoutePath]],
) -> PsppInstance:
    """Instance with total preference orders given best-first per node."""
    order = {v: tuple(paths) for v, paths in order.items()}
    permitted = {v: tuple(sorted(paths)) for v, paths in order.items()}
    prefs = {
        v: frozenset(
            (paths[i], paths[j])
            for i in range(len(paths))
            for j in range(i + 1, len(paths))
        )
        for v, paths in order.items()
    }
    return PsppInstance(destination, frozenset(egresses), permitted, prefs, order)


@dataclass(frozen=True)
class PathDigraph:
    """Directed graph over paths: suffix arcs and strict-preference arcs."""

    paths: tuple[RoutePath, ...]
    arcs: tuple[tuple[RoutePath, RoutePath, str], ...]  # (from, to, "suffix"|"pref")

    def successors(self) -> dict[RoutePath, list[tuple[RoutePath, str]]]:
        succ: dict[RoutePath, list[tuple[RoutePath, str]]] = {p: [] for p in self.paths}
        for a, b, kind in self.arcs:
            succ[a].append((b, kind))
        return succ


def build_path_digraph(pspp: PsppInstance) -> PathDigraph:
    """Arcs: immediate suffix -> extension, and strictly-preferred -> worse
    among same-source permitted paths. Deterministic ordering."""
    paths = tuple(pspp.all_paths())
    present = set(paths)
    arcs: list[tuple[RoutePath, RoutePath, str]] = []
    for p in paths:
        if not is_empty(p):
            s = immediate_suffix(p)
            if s in present:
                arcs.append((s, p, "suffix"))
    for v in sorted(pspp.permitted):
        pv = pspp.permitted[v]
        for i, p in enumerate(pv):
            for q in pv[i + 1 :]:
                if pspp.strictly_prefers(v, p, q):
                    arcs.append((p, q, "pref"))
                elif pspp.strictly_prefers(v, q, p):
                    arcs.append((q, p, "pref"))
    return PathDigraph(paths, tuple(sorted(arcs)))


@dataclass(frozen=True)
class SafetyResult:
    safe: bool
    cycle: Optional[tuple[RoutePath, ...]] = None  # first back-edge cycle if unsafe
    ranks: Optional[Mapping[RoutePath, int]] = None  # topological witness if safe

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.safe


def is_safe(dg: PathDigraph) -> SafetyResult:
    """Acyclicity check; returns a cycle witness or a rank witness."""
    succ = dg.successors()
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {p: WHITE for p in dg.paths}
    parent: dict[RoutePath, Optional[RoutePath]] = {}
    for root in dg.paths:
        if color[root] != WHITE:
            continue
        stack: list[tuple[RoutePath, int]] = [(root, 0)]
        parent[root] = None
        color[root] = GRAY
        while stack:
            node, idx = stack[-1]
            nbrs = succ[node]
            if idx < len(nbrs):
                stack[-1] = (node, idx + 1)
                nxt = nbrs[idx][0]
                if color[nxt] == GRAY:
                    # back edge: unwind the explicit stack for the cycle
                    cyc = [nxt]
                    cur = node
                    while cur != nxt:
                        cyc.append(cur)
                        cur = parent[cur]
                    cyc.reverse()
                    return SafetyResult(False, tuple(cyc))
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, 0))
            else:
                color[node] = BLACK
                stack.pop()
    return SafetyResult(True, None, rank_witness(dg))


def rank_witness(dg: PathDigraph) -> dict[RoutePath, int]:
    """Longest-path ranks: rank strictly increases along every arc."""
    succ = dg.successors()
    indeg = {p: 0 for p in dg.paths}
    for _, b, _ in dg.arcs:
        indeg[b] += 1
    ranks = {p: 0 for p in dg.paths}
    queue = sorted(p for p in dg.paths if indeg[p] == 0)
    done = 0
    while queue:
        p = queue.pop(0)
        done += 1
        for q, _ in succ[p]:
            ranks[q] = max(ranks[q], ranks[p] + 1)
            indeg[q] -= 1
            if indeg[q] == 0:
                queue.append(q)
    if done != len(dg.paths):
        raise ValidationError("digraph is cyclic; no rank witness exists")
    return ranks


def validate_rank_witness(dg: PathDigraph, ranks: Mapping[RoutePath, float]) -> bool:
    """True iff rank strictly increases along every arc of dg."""
    return all(ranks[b] > ranks[a] for a, b, _ in dg.arcs)


def check_refinement(p: PsppInstance, q: PsppInstance) -> bool:
    """True iff p refines q: identical structure and every ordered pair of q
    ordered the same way in p."""
    if (
        p.destination != q.destination
        or p.egresses != q.egresses
        or set(p.permitted) != set(q.permitted)
    ):
        return False
    for v in q.permitted:
        if set(p.permitted[v]) != set(q.permitted[v]):
            return False
        pc = p.pref_closure(v)
        for pair in q.pref_closure(v):
            if pair not in pc:
                return False
    return True


def robustness_check(pspp: PsppInstance, nodes: Iterable[str], links: Iterable[tuple[str, str]]) -> bool:
    """Exhaustive sub-instance safety over single node/link removals.

    Exponential in spirit; intended for small instances only.
    """
    if not is_safe(build_path_digraph(pspp)).safe:
        return False
    for v in nodes:
        if not is_safe(build_path_digraph(pspp.without_node(v))).safe:
            return False
    for a, b in links:
        if not is_safe(build_path_digraph(pspp.without_link(a, b))).safe:
            return False
    return True


def export_digraph(dg: PathDigraph) -> str:
    """DOT text; path nodes rendered as space-joined node sequences."""
    def name(p: RoutePath) -> str:
        return '"' + " ".join(p) + '"'

    lines = ["digraph paths {"]
    for p in dg.paths:
        lines.append(f"  {name(p)};")
    for a, b, kind in dg.arcs:
        style = "solid" if kind == "suffix" else "dashed"
        lines.append(f"  {name(a)} -> {name(b)} [label={kind}, style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
