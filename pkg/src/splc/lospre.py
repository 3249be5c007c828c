"""Lifetime-optimal speculative partial redundancy elimination.

Given the vertices that need an expression (U), the vertices that destroy
its value (I), edge costs c and vertex liveness costs l, choose a life set
L for the temporary minimising

    sum of c over the calculating set C(U, L, I)  +  sum of l over L

where C(U, L, I) = {(x, y) in E : x not in L - I and y in U | L}.

The solver keeps, for every decomposition node u and every subset X of
its four boundary vertices, the cheapest cost restricted to u's subgraph
over life sets meeting the boundary in exactly X.  Subsets are 4-bit
masks with bit 0 = S, 1 = T, 2 = B, 3 = C.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Mapping, Optional

from .lang import Expr, expr_vars, subexprs
from .spl import ASSIGN, COND, LOOP, PARALLEL, SERIES, Decomposition, DecompNode, Edge, SplGraph

log = logging.getLogger(__name__)

S_BIT, T_BIT, B_BIT, C_BIT = 1, 2, 4, 8
MASKS = range(16)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


@dataclass(frozen=True, order=True)
class CostK:
    """Pair compared primary-first.  Scalar costs leave ``secondary`` at 0."""

    primary: Fraction = Fraction(0)
    secondary: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "primary", _frac(self.primary))
        object.__setattr__(self, "secondary", _frac(self.secondary))

    def __add__(self, other: "CostK") -> "CostK":
        return CostK(self.primary + other.primary, self.secondary + other.secondary)

    def __sub__(self, other: "CostK") -> "CostK":
        return CostK(self.primary - other.primary, self.secondary - other.secondary)

    @classmethod
    def parse(cls, value) -> "CostK":
        """Accept a number, a numeric string or a ``[primary, secondary]`` pair."""
        if isinstance(value, CostK):
            return value
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError(f"cost pair needs two components, got {value!r}")
            return cls(_frac(value[0]), _frac(value[1]))
        return cls(_frac(value))

    def to_json(self) -> list:
        return [json_number(self.primary), json_number(self.secondary)]

    def __str__(self):
        if self.secondary == 0:
            return format_number(self.primary)
        return f"({format_number(self.primary)}, {format_number(self.secondary)})"


ZERO = CostK()


def _terminates(x: Fraction) -> bool:
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


def json_number(x):
    """Exact JSON rendering: int, terminating decimal, else the string "p/q"."""
    x = _frac(x)
    if x.denominator == 1:
        return int(x)
    return float(x) if _terminates(x) else f"{x.numerator}/{x.denominator}"


def format_number(x) -> str:
    v = json_number(x)
    return v if isinstance(v, str) else repr(v)


def _ksum(items: Iterable[CostK]) -> CostK:
    p = s = Fraction(0)
    for k in items:
        p += k.primary
        s += k.secondary
    return CostK(p, s)


@dataclass
class LospreInstance:
    use: frozenset
    invalidate: frozenset
    edge_cost_default: CostK = CostK(1)
    vertex_cost_default: CostK = CostK(0)
    edge_costs: Mapping[Edge, CostK] = field(default_factory=dict)
    vertex_costs: Mapping[int, CostK] = field(default_factory=dict)

    def __post_init__(self):
        self.use = frozenset(self.use)
        self.invalidate = frozenset(self.invalidate)

    def c(self, e: Edge) -> CostK:
        return self.edge_costs.get(e, self.edge_cost_default)

    def l(self, v: int) -> CostK:  # noqa: E743
        return self.vertex_costs.get(v, self.vertex_cost_default)

    def check(self, g: SplGraph) -> None:
        unknown = (self.use | self.invalidate | set(self.vertex_costs)) - g.vertices
        if unknown:
            raise ValueError(f"instance mentions unknown vertices {sorted(unknown)}")
        bad = set(self.edge_costs) - set(g.labels)
        if bad:
            raise ValueError(f"instance mentions unknown edges {sorted(bad)}")
        for k in [self.edge_cost_default, self.vertex_cost_default,
                  *self.edge_costs.values(), *self.vertex_costs.values()]:
            if k < ZERO:
                raise ValueError("costs must be non-negative")

    @classmethod
    def from_json(cls, data: dict) -> "LospreInstance":
        return cls(
            use=frozenset(int(v) for v in data.get("use", [])),
            invalidate=frozenset(int(v) for v in data.get("invalidate", [])),
            edge_cost_default=CostK.parse(data.get("edge_cost_default", 1)),
            vertex_cost_default=CostK.parse(data.get("vertex_cost_default", 0)),
            edge_costs={(int(d["edge"][0]), int(d["edge"][1])): CostK.parse(d["cost"])
                        for d in data.get("edge_costs", [])},
            vertex_costs={int(d["vertex"]): CostK.parse(d["cost"])
                          for d in data.get("vertex_costs", [])},
        )

    @classmethod
    def load(cls, path) -> "LospreInstance":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def to_json(self) -> dict:
        return {
            "use": sorted(self.use),
            "invalidate": sorted(self.invalidate),
            "edge_cost_default": self.edge_cost_default.to_json(),
            "vertex_cost_default": self.vertex_cost_default.to_json(),
            "edge_costs": [{"edge": list(e), "cost": k.to_json()}
                           for e, k in sorted(self.edge_costs.items())],
            "vertex_costs": [{"vertex": v, "cost": k.to_json()}
                             for v, k in sorted(self.vertex_costs.items())],
        }


def is_calculating(x: int, y: int, use, life, inval) -> bool:
    return (x not in life or x in inval) and (y in use or y in life)


def calculating_set(g: SplGraph, use, life, inval) -> frozenset:
    life = set(life)
    return frozenset(e for e in g.edges if is_calculating(e[0], e[1], use, life, inval))


def total_cost(g: SplGraph, inst: LospreInstance, life) -> CostK:
    life = set(life)
    calc = calculating_set(g, inst.use, life, inst.invalidate)
    return _ksum([inst.c(e) for e in calc] + [inst.l(v) for v in life])


def mask_vertices(mask: int, boundary) -> list[int]:
    return [v for i, v in enumerate(boundary) if mask >> i & 1]


def masks_compatible(kind: str, x: int, xv: int, xw: Optional[int] = None) -> bool:
    """Check the boundary-sharing constraints between a node's mask and its
    children's.

    ``series-left`` compares X with X_v on S, B, C; ``series-right`` X with
    X_w on T, B, C; ``series-cross`` T of X_v with S of X_w; ``series`` all
    three.  ``parallel`` requires equal masks.  Loop children share no
    boundary vertex with the loop, so anything goes.
    """
    if kind == "series-left":
        return (x ^ xv) & (S_BIT | B_BIT | C_BIT) == 0
    if kind == "series-right":
        return (x ^ xw) & (T_BIT | B_BIT | C_BIT) == 0
    if kind == "series-cross":
        return bool(xv & T_BIT) == bool(xw & S_BIT)
    if kind == "series":
        return (masks_compatible("series-left", x, xv)
                and masks_compatible("series-right", x, None, xw)
                and masks_compatible("series-cross", x, xv, xw))
    if kind == "parallel":
        return x == xv and (xw is None or x == xw)
    if kind == "loop":
        return True
    raise ValueError(f"unknown node kind {kind!r}")


class _IntCosts:
    """An instance's costs scaled by a common denominator to integer pairs,
    which keeps the inner loops off Fraction arithmetic."""

    def __init__(self, inst: "LospreInstance"):
        ks = [inst.edge_cost_default, inst.vertex_cost_default,
              *inst.edge_costs.values(), *inst.vertex_costs.values()]
        self.scale = lcm(*(x.denominator for k in ks for x in (k.primary, k.secondary)))
        self.c_default = self.pair(inst.edge_cost_default)
        self.l_default = self.pair(inst.vertex_cost_default)
        self.c_map = {e: self.pair(k) for e, k in inst.edge_costs.items()}
        self.l_map = {v: self.pair(k) for v, k in inst.vertex_costs.items()}
        self.use = inst.use
        self.inval = inst.invalidate

    def pair(self, k: CostK) -> tuple[int, int]:
        return int(k.primary * self.scale), int(k.secondary * self.scale)

    def c(self, e: Edge) -> tuple[int, int]:
        return self.c_map.get(e, self.c_default)

    def l(self, v: int) -> tuple[int, int]:  # noqa: E743
        return self.l_map.get(v, self.l_default)

    def l_mask(self, mask: int, boundary) -> tuple[int, int]:
        p = q = 0
        for i, v in enumerate(boundary):
            if mask >> i & 1:
                a, b = self.l(v)
                p += a
                q += b
        return p, q


class DpTable:
    """dp[u, X] for the 16 masks X, plus the child masks each entry chose."""

    __slots__ = ("raw", "back", "scale")

    def __init__(self, raw: list, back: list, scale: int):
        self.raw = raw
        self.back = back
        self.scale = scale

    def __getitem__(self, mask: int) -> CostK:
        p, q = self.raw[mask]
        return CostK(Fraction(p, self.scale), Fraction(q, self.scale))

    @property
    def values(self) -> list:
        return [self[m] for m in MASKS]


def _int_costs(inst: LospreInstance) -> _IntCosts:
    # rebuilt when the instance's fields are reassigned
    key = (inst.use, inst.invalidate, inst.edge_cost_default, inst.vertex_cost_default,
           id(inst.edge_costs), id(inst.vertex_costs))
    cached = inst.__dict__.get("_int_costs")
    if cached is None or cached[0] != key:
        cached = (key, _IntCosts(inst))
        inst.__dict__["_int_costs"] = cached
    return cached[1]


def dp_atomic(node: DecompNode, inst: LospreInstance) -> DpTable:
    k = _int_costs(inst)
    (x, y), = node.own_edges
    bnd = node.boundary
    cp, cs = k.c((x, y))
    raw = []
    for mask in MASKS:
        life = set(mask_vertices(mask, bnd))
        p, q = k.l_mask(mask, bnd)
        if is_calculating(x, y, k.use, life, k.inval):
            p, q = p + cp, q + cs
        raw.append((p, q))
    return DpTable(raw, [None] * 16, k.scale)


def dp_series(node: DecompNode, left: DpTable, right: DpTable, inst: LospreInstance) -> DpTable:
    k = _int_costs(inst)
    lt = k.l(node.children[0].t)
    lb, lc = k.l(node.b), k.l(node.c)
    lraw, rraw = left.raw, right.raw
    raw, back = [], []
    for x in MASKS:
        dp_, dq = 0, 0
        if x & B_BIT:
            dp_, dq = dp_ + lb[0], dq + lb[1]
        if x & C_BIT:
            dp_, dq = dp_ + lc[0], dq + lc[1]
        # T_v = S_w is either in both child masks or in neither
        xv, xw = x & (S_BIT | B_BIT | C_BIT), x & (T_BIT | B_BIT | C_BIT)
        a, b = lraw[xv], rraw[xw]
        best = (a[0] + b[0] - dp_, a[1] + b[1] - dq)
        choice = (xv, xw)
        a, b = lraw[xv | T_BIT], rraw[xw | S_BIT]
        alt = (a[0] + b[0] - dp_ - lt[0], a[1] + b[1] - dq - lt[1])
        if alt < best:
            best, choice = alt, (xv | T_BIT, xw | S_BIT)
        raw.append(best)
        back.append(choice)
    return DpTable(raw, back, k.scale)


def dp_parallel(node: DecompNode, left: DpTable, right: DpTable, inst: LospreInstance) -> DpTable:
    k = _int_costs(inst)
    bnd = node.boundary
    # edges both branches contain (e.g. two S->B break edges) are counted once
    shared = sorted(node.children[0].boundary_edges & node.children[1].boundary_edges)
    raw, back = [], []
    for x in MASKS:
        dp_, dq = k.l_mask(x, bnd)
        if shared:
            life = set(mask_vertices(x, bnd))
            for e in shared:
                if is_calculating(e[0], e[1], k.use, life, k.inval):
                    cp, cs = k.c(e)
                    dp_, dq = dp_ + cp, dq + cs
        a, b = left.raw[x], right.raw[x]
        raw.append((a[0] + b[0] - dp_, a[1] + b[1] - dq))
        back.append((x, x))
    return DpTable(raw, back, k.scale)


def dp_loop(node: DecompNode, child: DpTable, inst: LospreInstance) -> DpTable:
    k = _int_costs(inst)
    bnd = node.boundary
    cbnd = node.children[0].boundary
    frame = [(e, k.c(e)) for e in node.own_edges]
    use, inval = k.use, k.inval
    inner = [set(mask_vertices(xv, cbnd)) for xv in MASKS]
    raw, back = [], []
    for x in MASKS:
        outer = set(mask_vertices(x, bnd))
        best = choice = None
        for xv in MASKS:
            life = outer | inner[xv]
            p, q = child.raw[xv]
            for (a, b), (cp, cs) in frame:
                if is_calculating(a, b, use, life, inval):
                    p, q = p + cp, q + cs
            if best is None or (p, q) < best:
                best, choice = (p, q), xv
        lp, lq = k.l_mask(x, bnd)
        raw.append((best[0] + lp, best[1] + lq))
        back.append((choice,))
    return DpTable(raw, back, k.scale)


def dp_tables(decomp: Decomposition, inst: LospreInstance) -> dict[int, DpTable]:
    """Tables for every node, keyed by postorder index."""
    tables: dict[int, DpTable] = {}
    for node in decomp.postorder:
        if node.is_leaf:
            t = dp_atomic(node, inst)
        elif node.kind == SERIES:
            t = dp_series(node, *(tables[c.index] for c in node.children), inst)
        elif node.kind == PARALLEL:
            t = dp_parallel(node, *(tables[c.index] for c in node.children), inst)
        elif node.kind == LOOP:
            t = dp_loop(node, tables[node.children[0].index], inst)
        else:
            raise ValueError(f"unknown node kind {node.kind!r}")
        tables[node.index] = t
    return tables


@dataclass
class LospreResult:
    cost: CostK
    life_set: frozenset
    calculating_set: frozenset
    tables: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "cost": self.cost.to_json(),
            "life_set": sorted(self.life_set),
            "calculating_set": [list(e) for e in sorted(self.calculating_set)],
        }


def solve(decomp: Decomposition, inst: LospreInstance) -> LospreResult:
    """Optimal life set and its cost."""
    g = decomp.graph
    inst.check(g)
    tables = dp_tables(decomp, inst)
    root = tables[decomp.root.index]
    mask = min(MASKS, key=lambda m: (root.raw[m], m))

    life: set = set()
    stack = [(decomp.root, mask)]
    while stack:
        node, m = stack.pop()
        life.update(mask_vertices(m, node.boundary))
        choice = tables[node.index].back[m]
        if choice is not None:
            stack.extend(zip(node.children, choice))

    cost = root[mask]
    check = total_cost(g, inst, life)
    if check != cost:
        raise AssertionError(f"witness costs {check}, table says {cost}")
    return LospreResult(cost, frozenset(life),
                        calculating_set(g, inst.use, life, inst.invalidate), tables)


def _computes(lab, expr: Expr) -> bool:
    if lab.expr is None or lab.kind not in (ASSIGN, COND):
        return False
    return any(sub == expr for sub in subexprs(lab.expr))


def derive_instance(g: SplGraph, expr: Expr, *, edge_cost=CostK(1),
                    vertex_cost=CostK(0)) -> LospreInstance:
    """Use/invalidate sets for ``expr`` read off the edge labels.

    An edge whose statement or condition contains ``expr`` puts its target
    in U; an edge assigning a variable of ``expr`` puts its target in I.
    Program entry and exit are always invalidating.
    """
    names = expr_vars(expr)
    use, inval = set(), {g.s, g.t}
    for (_, y), labs in g.labels.items():
        for lab in labs:
            if _computes(lab, expr):
                use.add(y)
            if lab.kind == ASSIGN and lab.target in names:
                inval.add(y)
    return LospreInstance(frozenset(use), frozenset(inval),
                          CostK.parse(edge_cost), CostK.parse(vertex_cost))
