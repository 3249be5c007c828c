"""SPL graphs, the series/parallel/loop operations and grammatical decompositions.

An SPL graph is a control-flow graph with four distinguished vertices
(start S, terminate T, break B, continue C).  Edges are a simple set of
ordered pairs; statements that land on the same pair share one edge and
its label set.

Programs are turned into a graph plus its decomposition tree by
:func:`cfg_of`, which mirrors the syntax tree node for node.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional

from . import lang
from .lang import Ast, Expr

Edge = tuple[int, int]
Boundary = tuple[int, int, int, int]

_fresh = itertools.count(1 << 32)


def _fresh_id() -> int:
    return next(_fresh)


# --- labels ------------------------------------------------------------------

ASSIGN, SKIP, BREAK, CONTINUE = "assign", "skip", "break", "continue"
COND, LOOP_BACK, LOOP_EXIT = "cond", "loop-back", "loop-exit"
STMT_KINDS = frozenset({ASSIGN, SKIP, BREAK, CONTINUE})


@dataclass(frozen=True)
class EdgeLabel:
    kind: str
    target: Optional[str] = None
    expr: Optional[Expr] = None
    taken: Optional[bool] = None
    span: lang.Span = (0, 0)

    @classmethod
    def from_stmt(cls, stmt: Ast) -> "EdgeLabel":
        if isinstance(stmt, lang.Assign):
            return cls(ASSIGN, target=stmt.target, expr=stmt.expr, span=stmt.span)
        kind = {lang.Skip: SKIP, lang.Break: BREAK, lang.Continue: CONTINUE}[type(stmt)]
        return cls(kind, span=stmt.span)

    @classmethod
    def cond(cls, expr: Optional[Expr], taken: bool, span=(0, 0)) -> "EdgeLabel":
        return cls(COND, expr=expr, taken=taken, span=span)

    def sort_key(self):
        return (self.span, self.kind, bool(self.taken))

    def __str__(self) -> str:
        if self.kind == ASSIGN:
            return f"{self.target} := {lang.format_expr(self.expr)}"
        if self.kind == COND:
            text = "?" if self.expr is None else lang.format_expr(self.expr)
            return text if self.taken else f"not ({text})"
        return self.kind


def sorted_labels(labels: Iterable[EdgeLabel]) -> list[EdgeLabel]:
    return sorted(labels, key=EdgeLabel.sort_key)


# --- graphs ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplGraph:
    """Immutable SPL graph.  ``labels`` doubles as the edge set."""

    vertices: frozenset
    labels: dict  # Edge -> frozenset[EdgeLabel]
    s: int
    t: int
    b: int
    c: int

    @property
    def edges(self):
        return self.labels.keys()

    @property
    def boundary(self) -> Boundary:
        return (self.s, self.t, self.b, self.c)

    @cached_property
    def succ(self) -> dict[int, list[int]]:
        out = {v: [] for v in self.vertices}
        for x, y in self.labels:
            out[x].append(y)
        return out

    @cached_property
    def pred(self) -> dict[int, list[int]]:
        out = {v: [] for v in self.vertices}
        for x, y in self.labels:
            out[y].append(x)
        return out

    def __eq__(self, other):
        if not isinstance(other, SplGraph):
            return NotImplemented
        return (self.boundary == other.boundary and self.vertices == other.vertices
                and self.labels == other.labels)

    __hash__ = None

    def check(self) -> None:
        """Raise ``ValueError`` if a structural invariant is broken."""
        if not set(self.boundary) <= self.vertices:
            raise ValueError("distinguished vertex missing from vertex set")
        for x, y in self.labels:
            if x not in self.vertices or y not in self.vertices:
                raise ValueError(f"edge {(x, y)} has an endpoint outside the graph")


def _merge_labels(dst: dict, src: dict, rename) -> None:
    for (x, y), labs in src.items():
        key = (rename(x), rename(y))
        prev = dst.get(key)
        dst[key] = labs if prev is None else prev | labs


def atomic(kind: str = "eps", label: Optional[EdgeLabel] = None) -> SplGraph:
    """One of A_eps, A_break, A_continue on four fresh vertices."""
    s, t, b, c = (_fresh_id() for _ in range(4))
    target = {"eps": t, "break": b, "continue": c}[kind]
    if label is None:
        label = EdgeLabel({"eps": SKIP, "break": BREAK, "continue": CONTINUE}[kind])
    return SplGraph(frozenset((s, t, b, c)), {(s, target): frozenset({label})}, s, t, b, c)


def _require_disjoint(g1: SplGraph, g2: SplGraph) -> None:
    if g1.vertices & g2.vertices:
        raise ValueError("operands of an SPL operation must have disjoint vertex sets")


def series(g1: SplGraph, g2: SplGraph) -> SplGraph:
    """Identify T1 with S2, B1 with B2 and C1 with C2."""
    _require_disjoint(g1, g2)
    ren = {g2.s: g1.t, g2.b: g1.b, g2.c: g1.c}
    labels = dict(g1.labels)
    _merge_labels(labels, g2.labels, lambda v: ren.get(v, v))
    vertices = g1.vertices | {ren.get(v, v) for v in g2.vertices}
    return SplGraph(frozenset(vertices), labels, g1.s, g2.t, g1.b, g1.c)


def parallel(g1: SplGraph, g2: SplGraph, cond: Optional[Expr] = None) -> SplGraph:
    """Identify all four distinguished pairs.

    With ``cond``, the out-edges of S1 get a taken condition label and
    those of S2 a not-taken one, as an ``if`` statement would.
    """
    _require_disjoint(g1, g2)
    l1, l2 = dict(g1.labels), dict(g2.labels)
    if cond is not None:
        span = getattr(cond, "span", (0, 0))
        for labs, start, taken in ((l1, g1.s, True), (l2, g2.s, False)):
            tag = EdgeLabel.cond(cond, taken, span)
            for e in [e for e in labs if e[0] == start]:
                labs[e] = labs[e] | {tag}
    ren = {g2.s: g1.s, g2.t: g1.t, g2.b: g1.b, g2.c: g1.c}
    _merge_labels(l1, l2, lambda v: ren.get(v, v))
    vertices = g1.vertices | {ren.get(v, v) for v in g2.vertices}
    return SplGraph(frozenset(vertices), l1, g1.s, g1.t, g1.b, g1.c)


def loop(g1: SplGraph, cond: Optional[Expr] = None) -> SplGraph:
    """Wrap ``g1`` in a loop frame: four fresh vertices and five new edges."""
    s, t, b, c = (_fresh_id() for _ in range(4))
    labels = dict(g1.labels)
    span = getattr(cond, "span", (0, 0))
    labels[(s, g1.s)] = frozenset({EdgeLabel.cond(cond, True, span)})
    labels[(s, t)] = frozenset({EdgeLabel.cond(cond, False, span)})
    back = frozenset({EdgeLabel(LOOP_BACK)})
    _merge_labels(labels, {(g1.t, s): back, (g1.c, s): back}, lambda v: v)
    labels[(g1.b, t)] = frozenset({EdgeLabel(LOOP_EXIT)})
    return SplGraph(g1.vertices | {s, t, b, c}, labels, s, t, b, c)


def is_closed_graph(g: SplGraph) -> bool:
    """True iff neither B nor C has an incoming edge."""
    return not any(y == g.b or y == g.c for _, y in g.labels)


# --- decompositions ------------------------------------------------------------

EPS, ATOM_BREAK, ATOM_CONTINUE = "eps", "break", "continue"
SERIES, PARALLEL, LOOP = "series", "parallel", "loop"
ATOMIC_KINDS = frozenset({EPS, ATOM_BREAK, ATOM_CONTINUE})


class DecompNode:
    """One node of a grammatical decomposition.

    ``own_edges`` are the edges this node introduces (the single edge of a
    leaf, the five frame edges of a loop, nothing for series/parallel).
    ``boundary_edges`` are the edges of the node's subgraph whose endpoints
    are both distinguished; only these can be shared between siblings.
    """

    __slots__ = ("kind", "children", "boundary", "own_edges", "boundary_edges",
                 "ast", "index")

    def __init__(self, kind, children, boundary, own_edges, ast=None):
        self.kind = kind
        self.children = tuple(children)
        self.boundary = boundary
        self.own_edges = tuple(own_edges)
        self.boundary_edges = frozenset()
        self.ast = ast
        self.index = -1

    @property
    def is_leaf(self) -> bool:
        return self.kind in ATOMIC_KINDS

    @property
    def s(self):
        return self.boundary[0]

    @property
    def t(self):
        return self.boundary[1]

    @property
    def b(self):
        return self.boundary[2]

    @property
    def c(self):
        return self.boundary[3]

    def walk(self) -> Iterator["DecompNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def edge_set(self) -> set[Edge]:
        """All edges of the subgraph rooted here."""
        return {e for n in self.walk() for e in n.own_edges}

    def vertex_set(self) -> set[int]:
        return {v for n in self.walk() for v in n.boundary}

    def __repr__(self):
        return f"DecompNode({self.kind}, boundary={self.boundary}, children={len(self.children)})"


def shared_edges(node: DecompNode) -> frozenset:
    """Edges present in both children of a series/parallel node."""
    if len(node.children) != 2:
        return frozenset()
    a, b = node.children
    return a.boundary_edges & b.boundary_edges


@dataclass(frozen=True, eq=False)
class Decomposition:
    root: DecompNode
    graph: SplGraph
    postorder: tuple = field(repr=False)  # children before parents

    def __len__(self):
        return len(self.postorder)

    def check(self) -> None:
        """Raise ``ValueError`` unless the tree recomposes to ``graph``."""
        g = recompose(self.root)
        if g != SplGraph(self.graph.vertices, {e: frozenset() for e in self.graph.edges},
                         *self.graph.boundary):
            raise ValueError("decomposition does not recompose to its graph")


def _postorder(root: DecompNode) -> list[DecompNode]:
    out = []
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(node.children))
    return out


def _fill_boundary_edges(order: list[DecompNode]) -> None:
    for node in order:
        if node.is_leaf:
            node.boundary_edges = frozenset(node.own_edges)
        elif node.kind == LOOP:
            node.boundary_edges = frozenset({(node.s, node.t)})
        else:
            bset = set(node.boundary)
            merged = node.children[0].boundary_edges | node.children[1].boundary_edges
            node.boundary_edges = frozenset(
                (x, y) for x, y in merged if x in bset and y in bset)


def recompose(root: DecompNode) -> SplGraph:
    """Rebuild the graph bottom-up from stored ids, checking every node's
    boundary against the operation that produced it.  Labels are left empty."""
    built: dict[int, SplGraph] = {}
    for node in _postorder(root):
        s, t, b, c = node.boundary
        if node.is_leaf:
            if len(set(node.boundary)) != 4 or len(node.own_edges) != 1:
                raise ValueError(f"malformed leaf {node!r}")
            want = {EPS: (s, t), ATOM_BREAK: (s, b), ATOM_CONTINUE: (s, c)}[node.kind]
            if node.own_edges[0] != want:
                raise ValueError(f"leaf edge {node.own_edges[0]} should be {want}")
            g = SplGraph(frozenset(node.boundary), {want: frozenset()}, s, t, b, c)
        elif node.kind == LOOP:
            g1 = built.pop(id(node.children[0]))
            new = {s, t, b, c}
            if new & g1.vertices or len(new) != 4:
                raise ValueError("loop frame vertices must be fresh")
            frame = [(s, g1.s), (s, t), (g1.t, s), (g1.c, s), (g1.b, t)]
            if set(node.own_edges) != set(frame):
                raise ValueError("loop node carries the wrong frame edges")
            labels = dict(g1.labels)
            labels.update((e, frozenset()) for e in frame)
            g = SplGraph(g1.vertices | new, labels, s, t, b, c)
        else:
            g1 = built.pop(id(node.children[0]))
            g2 = built.pop(id(node.children[1]))
            if node.kind == SERIES:
                ok = (s == g1.s and t == g2.t and g1.t == g2.s
                      and b == g1.b == g2.b and c == g1.c == g2.c)
                shared = {g1.t, g1.b, g1.c}
            else:
                ok = node.boundary == g1.boundary == g2.boundary
                shared = set(node.boundary)
            if not ok or (g1.vertices & g2.vertices) != shared:
                raise ValueError(f"{node.kind} node boundary does not match its children")
            labels = dict(g1.labels)
            labels.update(g2.labels)
            g = SplGraph(g1.vertices | g2.vertices, labels, s, t, b, c)
        built[id(node)] = g
    return built[id(root)]


# --- program -> (graph, decomposition) ----------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def make(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, keep: int, other: int) -> None:
        self.parent[self.find(other)] = self.find(keep)


def cfg_of(ast: Ast) -> tuple[SplGraph, Decomposition]:
    """Build the control-flow graph of ``ast`` and its decomposition.

    Runs in time linear in the size of the tree (up to union-find).
    Vertex ids are renumbered from 1 in breadth-first order from S, so the
    numbering is stable for a given program text.
    """
    uf = _UnionFind()
    records: list[list] = []  # [src, dst, [labels]] on raw ids
    # each result is (node, start_out) where start_out lists record indices
    # leaving the fragment's start vertex
    results: list[tuple[DecompNode, list[int]]] = []
    stack: list[tuple[Ast, bool]] = [(ast, False)]

    while stack:
        node, expanded = stack.pop()
        if isinstance(node, lang.ATOMIC_STMTS):
            s, t, b, c = uf.make(), uf.make(), uf.make(), uf.make()
            if isinstance(node, lang.Break):
                kind, dst = ATOM_BREAK, b
            elif isinstance(node, lang.Continue):
                kind, dst = ATOM_CONTINUE, c
            else:
                kind, dst = EPS, t
            records.append([s, dst, [EdgeLabel.from_stmt(node)]])
            k = len(records) - 1
            results.append((DecompNode(kind, (), (s, t, b, c), [k], node), [k]))
            continue
        if not expanded:
            stack.append((node, True))
            stack.extend((ch, False) for ch in reversed(lang.children(node)))
            continue
        if isinstance(node, lang.While):
            body, _ = results.pop()
            s1, t1, b1, c1 = body.boundary
            s, t, b, c = uf.make(), uf.make(), uf.make(), uf.make()
            span = node.cond.span
            base = len(records)
            records.append([s, s1, [EdgeLabel.cond(node.cond, True, span)]])
            records.append([s, t, [EdgeLabel.cond(node.cond, False, span)]])
            records.append([t1, s, [EdgeLabel(LOOP_BACK)]])
            records.append([c1, s, [EdgeLabel(LOOP_BACK)]])
            records.append([b1, t, [EdgeLabel(LOOP_EXIT)]])
            own = list(range(base, base + 5))
            results.append((DecompNode(LOOP, (body,), (s, t, b, c), own, node), own[:2]))
            continue
        (n2, out2) = results.pop()
        (n1, out1) = results.pop()
        s1, t1, b1, c1 = n1.boundary
        s2, t2, b2, c2 = n2.boundary
        if isinstance(node, lang.Seq):
            uf.union(t1, s2)
            uf.union(b1, b2)
            uf.union(c1, c2)
            results.append((DecompNode(SERIES, (n1, n2), (s1, t2, b1, c1), (), node), out1))
        else:
            span = node.cond.span
            for k in out1:
                records[k][2].append(EdgeLabel.cond(node.cond, True, span))
            for k in out2:
                records[k][2].append(EdgeLabel.cond(node.cond, False, span))
            uf.union(s1, s2)
            uf.union(t1, t2)
            uf.union(b1, b2)
            uf.union(c1, c2)
            results.append((DecompNode(PARALLEL, (n1, n2), (s1, t1, b1, c1), (), node),
                            out1 + out2))

    root, _ = results.pop()
    return _finish(uf, records, root)


def _finish(uf: _UnionFind, records: list, root: DecompNode):
    find = uf.find
    labels_raw: dict[Edge, set] = {}
    adj: dict[int, list[int]] = {}
    for x, y, labs in records:
        key = (find(x), find(y))
        if key in labels_raw:
            labels_raw[key].update(labs)
        else:
            labels_raw[key] = set(labs)
            adj.setdefault(key[0], []).append(key[1])

    # breadth-first renumbering from S; unreachable vertices follow in raw order
    start = find(root.boundary[0])
    number = {start: 1}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in adj.get(x, ()):
            if y not in number:
                number[y] = len(number) + 1
                queue.append(y)
    for raw in range(len(uf.parent)):
        r = find(raw)
        if r not in number:
            number[r] = len(number) + 1

    def canon(x):
        return number[find(x)]

    labels = {(number[x], number[y]): frozenset(labs) for (x, y), labs in labels_raw.items()}
    order = _postorder(root)
    for i, node in enumerate(order):
        node.boundary = tuple(canon(v) for v in node.boundary)
        node.own_edges = tuple((canon(records[k][0]), canon(records[k][1]))
                               for k in node.own_edges)
        node.index = i
    _fill_boundary_edges(order)
    graph = SplGraph(frozenset(number.values()), labels, *root.boundary)
    return graph, Decomposition(root, graph, tuple(order))


def decomposition_of(parts) -> tuple[SplGraph, Decomposition]:
    """Build a graph and decomposition from a nested operation tree.

    ``parts`` is either an atomic kind (``"eps"``, ``"break"``,
    ``"continue"``) or a tuple ``("series", a, b)``, ``("parallel", a, b)``
    or ``("loop", a)``.  Useful for fixtures that do not come from a
    program, e.g. a series tree with a specific association.
    """
    def to_ast(p):
        if isinstance(p, str):
            return {EPS: lang.Skip, ATOM_BREAK: lang.Break, ATOM_CONTINUE: lang.Continue}[p]()
        op, *args = p
        if op == SERIES:
            return lang.Seq(to_ast(args[0]), to_ast(args[1]))
        if op == PARALLEL:
            return lang.If(lang.Num(1), to_ast(args[0]), to_ast(args[1]))
        if op == LOOP:
            return lang.While(lang.Num(1), to_ast(args[0]))
        raise ValueError(f"unknown operation {op!r}")
    return cfg_of(to_ast(parts))


def vertex_count(ast: Ast) -> int:
    """|V(cfg_of(ast))| from the counting recurrences, without building it."""
    counts: list[int] = []
    stack = [(ast, False)]
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, lang.ATOMIC_STMTS):
            counts.append(4)
        elif not expanded:
            stack.append((node, True))
            stack.extend((ch, False) for ch in reversed(lang.children(node)))
        elif isinstance(node, lang.While):
            counts.append(counts.pop() + 4)
        else:
            b, a = counts.pop(), counts.pop()
            counts.append(a + b - (3 if isinstance(node, lang.Seq) else 4))
    return counts[0]


# --- export --------------------------------------------------------------------

_OP_SYMBOL = {SERIES: ";", PARALLEL: "||", LOOP: "*", EPS: "A_eps",
              ATOM_BREAK: "A_break", ATOM_CONTINUE: "A_continue"}


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(obj, name: str = "G") -> str:
    """Graphviz text for an :class:`SplGraph` or a :class:`Decomposition`."""
    if isinstance(obj, Decomposition):
        return _decomposition_dot(obj, name)
    g = obj
    roles = {g.s: "S", g.t: "T", g.b: "B", g.c: "C"}
    lines = [f"digraph {name} {{", "  node [shape=circle];"]
    for v in sorted(g.vertices):
        if v in roles:
            lines.append(f'  {v} [label="{v}\\n{roles[v]}", shape=doublecircle, style=bold];')
        else:
            lines.append(f'  {v} [label="{v}"];')
    for (x, y), labs in g.labels.items():
        text = ", ".join(str(l) for l in sorted_labels(labs))
        lines.append(f"  {x} -> {y} [label={_dot_quote(text)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _decomposition_dot(d: Decomposition, name: str) -> str:
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    for node in d.postorder:
        s, t, b, c = node.boundary
        text = f"{_OP_SYMBOL[node.kind]}\\nS={s} T={t} B={b} C={c}"
        lines.append(f'  n{node.index} [label="{text}"];')
        for ch in node.children:
            lines.append(f"  n{node.index} -> n{ch.index};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: SplGraph) -> dict:
    edges = sorted(g.edges)
    return {
        "vertices": sorted(g.vertices),
        "edges": [list(e) for e in edges],
        "labels": [[str(l) for l in sorted_labels(g.labels[e])] for e in edges],
        "boundary": {"S": g.s, "T": g.t, "B": g.b, "C": g.c},
    }


def decomposition_to_json(d: Decomposition) -> dict:
    built: dict[int, dict] = {}
    for node in d.postorder:
        built[id(node)] = {
            "kind": node.kind,
            "boundary": list(node.boundary),
            "edges": [list(e) for e in node.own_edges],
            "children": [built.pop(id(ch)) for ch in node.children],
        }
    return built[id(d.root)]
