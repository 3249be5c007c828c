"""Backward liveness over an SPL graph, lifetimes and the interference graph."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

from .lang import expr_vars
from .spl import ASSIGN, COND, STMT_KINDS, Edge, EdgeLabel, SplGraph

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DefUse:
    defs: frozenset
    uses: frozenset


def def_use(labels: Iterable[EdgeLabel]) -> DefUse:
    """Def/use summary of one edge.

    Uses are unioned over assignment right-hand sides and conditions.  Defs
    are intersected over the statement labels, because when several
    statements collapse onto one edge only a variable every one of them
    writes is certainly killed.  Any skip/break/continue label empties it.
    """
    uses: set = set()
    defs = None
    for lab in labels:
        if lab.kind == ASSIGN:
            uses |= expr_vars(lab.expr)
            defs = {lab.target} if defs is None else defs & {lab.target}
        elif lab.kind == COND:
            if lab.expr is not None:
                uses |= expr_vars(lab.expr)
        elif lab.kind in STMT_KINDS:
            defs = set()
    return DefUse(frozenset(defs or ()), frozenset(uses))


def program_variables(g: SplGraph) -> frozenset:
    """Every identifier assigned or read on some edge of ``g``."""
    out = set()
    for labs in g.labels.values():
        for lab in labs:
            if lab.kind == ASSIGN:
                out.add(lab.target)
            if lab.expr is not None:
                out |= expr_vars(lab.expr)
    return frozenset(out)


def graph_def_use(g: SplGraph) -> dict[Edge, DefUse]:
    return {e: def_use(labs) for e, labs in g.labels.items()}


@dataclass(frozen=True, eq=False)
class LiveInfo:
    graph: SplGraph
    at_vertex: Mapping[int, frozenset]
    at_edge: Mapping[Edge, frozenset]

    @property
    def variables(self) -> frozenset:
        out = set()
        for vs in self.at_vertex.values():
            out |= vs
        return frozenset(out)

    def max_pressure(self) -> int:
        """max over vertices of |L(a)|; a lower bound on spill-free registers."""
        return max((len(vs) for vs in self.at_vertex.values()), default=0)

    def to_json(self) -> dict:
        return {str(v): sorted(self.at_vertex[v]) for v in sorted(self.at_vertex)}


def compute_liveness(g: SplGraph, du: Mapping[Edge, DefUse] | None = None) -> LiveInfo:
    """Least fixed point of L(e) = use(e) | (L(y) - def(e)), L(x) = U L(out-edges)."""
    if du is None:
        du = graph_def_use(g)
    live = {v: frozenset() for v in g.vertices}
    out_edges: dict[int, list[Edge]] = {v: [] for v in g.vertices}
    for e in g.edges:
        out_edges[e[0]].append(e)

    work = deque(sorted(g.vertices, reverse=True))
    queued = set(work)
    while work:
        x = work.popleft()
        queued.discard(x)
        new = set()
        for e in out_edges[x]:
            d = du[e]
            new |= d.uses
            new |= live[e[1]] - d.defs
        if new != live[x]:
            live[x] = frozenset(new)
            for p in g.pred[x]:
                if p not in queued:
                    queued.add(p)
                    work.append(p)

    at_edge = {e: du[e].uses | (live[e[1]] - du[e].defs) for e in g.edges}
    return LiveInfo(g, live, at_edge)


@dataclass(frozen=True)
class Lifetime:
    variable: str
    vertices: frozenset
    edges: frozenset
    connected: bool

    @property
    def empty(self) -> bool:
        return not self.vertices


def lifetimes(info: LiveInfo) -> dict[str, Lifetime]:
    """Per-variable live subgraphs.

    Connectivity is weak connectivity of the subgraph induced by the
    vertices where the variable is live.  Disconnected lifetimes are logged,
    not repaired.
    """
    g = info.graph
    vertices: dict[str, set] = {}
    edges: dict[str, set] = {}
    for v, vs in info.at_vertex.items():
        for name in vs:
            vertices.setdefault(name, set()).add(v)
    for e, vs in info.at_edge.items():
        for name in vs:
            edges.setdefault(name, set()).add(e)

    out = {}
    for name in sorted(program_variables(g) | vertices.keys() | edges.keys()):
        vset = vertices.get(name, set())
        ok = _weakly_connected(g, vset)
        if not ok:
            log.warning("lifetime of %r is not connected", name)
        out[name] = Lifetime(name, frozenset(vset), frozenset(edges.get(name, ())), ok)
    return out


def _weakly_connected(g: SplGraph, vset: set) -> bool:
    if not vset:
        return True
    start = next(iter(vset))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in g.succ[x] + g.pred[x]:
            if y in vset and y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(vset)


def disconnected(lts: Mapping[str, Lifetime]) -> list[str]:
    return [name for name, lt in lts.items() if not lt.connected]


@dataclass(frozen=True, eq=False)
class InterferenceGraph:
    variables: frozenset
    edges: frozenset  # of frozenset({u, v})

    @classmethod
    def from_pairs(cls, variables, pairs) -> "InterferenceGraph":
        return cls(frozenset(variables), frozenset(frozenset(p) for p in pairs))

    def interferes(self, u: str, v: str) -> bool:
        return frozenset((u, v)) in self.edges

    def neighbours(self, u: str) -> set:
        return {w for e in self.edges if u in e for w in e if w != u}

    def to_json(self) -> list:
        return sorted(sorted(e) for e in self.edges)


def interference_graph(lts: Mapping[str, Lifetime]) -> InterferenceGraph:
    """Edge {u, v} iff the two lifetimes share a vertex or an edge."""
    by_point: dict = {}
    for name, lt in lts.items():
        for p in lt.vertices:
            by_point.setdefault(("v", p), []).append(name)
        for p in lt.edges:
            by_point.setdefault(("e", p), []).append(name)
    pairs = set()
    for names in by_point.values():
        for u, v in combinations(sorted(names), 2):
            pairs.add(frozenset((u, v)))
    return InterferenceGraph(frozenset(lts), frozenset(pairs))


def analyse(g: SplGraph):
    """Liveness, lifetimes and interference in one call."""
    info = compute_liveness(g)
    lts = lifetimes(info)
    return info, lts, interference_graph(lts)


def liveness_to_json(info: LiveInfo, ig: InterferenceGraph) -> dict:
    return {"liveAtVertex": info.to_json(), "interference": ig.to_json()}


def interference_to_dot(ig: InterferenceGraph, name: str = "I") -> str:
    lines = [f"graph {name} {{"]
    lines += [f'  "{v}";' for v in sorted(ig.variables)]
    lines += [f'  "{u}" -- "{v}";' for u, v in ig.to_json()]
    lines.append("}")
    return "\n".join(lines) + "\n"
