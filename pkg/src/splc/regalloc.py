"""Minimum-cost register allocation by dynamic programming over an SPL
decomposition.

For every decomposition node H the table maps a boundary assignment f'
(over the variables live at S_H, T_H, B_H or C_H) to the cheapest total
cost of the edges of H under any assignment extending f'.  Assignments are
tuples aligned with the node's sorted domain; a register is an int in
``range(r)`` and ``SPILL`` (-1) marks a spilled variable.  Absent keys
mean +inf.

In spill-free mode, tables may be keyed by the register-renaming
canonical form of f', since the 0/inf cost model does not care which
register a variable gets.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Iterator, Mapping, Optional, Sequence

from .liveness import (InterferenceGraph, LiveInfo, interference_graph, lifetimes,
                       program_variables)
from .spl import LOOP, Decomposition, DecompNode, Edge, shared_edges

log = logging.getLogger(__name__)

SPILL = -1
INF = math.inf


# --- cost models -------------------------------------------------------------

def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def base_name(var: str) -> str:
    """Variable a web was split from (``x#2`` -> ``x``)."""
    return var.partition("#")[0]


class CostModel:
    """c(e, f) evaluated on f restricted to L(e).

    ``live`` is the sorted tuple of variables live on ``edge`` and
    ``values`` their registers (or SPILL), position by position.
    """

    renaming_invariant = False

    def edge_cost(self, edge: Edge, live: tuple, values: tuple):
        raise NotImplementedError


class SpillCostModel(CostModel):
    """Sum of w(e, v) over spilled variables live on e."""

    def __init__(self, default_weight=1, weights: Optional[Mapping] = None):
        self.default_weight = as_fraction(default_weight)
        self.weights = {k: as_fraction(w) for k, w in (weights or {}).items()}

    def weight(self, edge: Edge, var: str) -> Fraction:
        return self.weights.get((edge, base_name(var)), self.default_weight)

    def edge_cost(self, edge, live, values):
        total = Fraction(0)
        for var, val in zip(live, values):
            if val == SPILL:
                total += self.weight(edge, var)
        return total

    @classmethod
    def from_json(cls, data: dict) -> "SpillCostModel":
        weights = {}
        for item in data.get("weights", []):
            src, dst = item["edge"]
            weights[((int(src), int(dst)), item["var"])] = item["w"]
        for w in [data.get("default_weight", 1), *weights.values()]:
            if as_fraction(w) < 0:
                raise ValueError("spill weights must be non-negative")
        return cls(data.get("default_weight", 1), weights)

    @classmethod
    def load(cls, path) -> "SpillCostModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


class SpillFreeModel(CostModel):
    """0 when nothing live on the edge is spilled, +inf otherwise."""

    renaming_invariant = True

    def edge_cost(self, edge, live, values):
        return INF if SPILL in values else 0


def total_cost(info: LiveInfo, cm: CostModel, f: Mapping[str, int]) -> tuple:
    """(sum, per-edge breakdown) of c(e, f) over every edge."""
    per_edge = {}
    total = Fraction(0)
    for e in info.graph.edges:
        live = tuple(sorted(info.at_edge[e]))
        c = cm.edge_cost(e, live, tuple(f.get(v, SPILL) for v in live))
        per_edge[e] = c
        total = total + c
    return total, per_edge


# --- assignments -------------------------------------------------------------

def _adjacency(ig: InterferenceGraph) -> dict[str, set]:
    adj: dict[str, set] = {v: set() for v in ig.variables}
    for e in ig.edges:
        u, v = tuple(e)
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    return adj


def _enumerate(names: Sequence[str], r: int, adj: Mapping[str, set],
               fixed: Optional[Mapping[str, int]] = None,
               canonical: bool = False) -> Iterator[tuple]:
    """Valid value tuples for ``names``: SPILL first, then registers in
    order.  ``fixed`` gives already-decided neighbours to respect.  With
    ``canonical``, only register-renaming representatives are produced."""
    n = len(names)
    fixed = fixed or {}
    clash = [[j for j in range(i) if names[j] in adj.get(names[i], ())] for i in range(n)]
    outside = [[fixed[w] for w in adj.get(names[i], ()) if w in fixed] for i in range(n)]
    values = [SPILL] * n

    def rec(i, used):
        if i == n:
            yield tuple(values)
            return
        top = min(r, used + 1) if canonical else r
        taken = {values[j] for j in clash[i]}
        taken.update(outside[i])
        for val in (SPILL, *range(top)):
            if val != SPILL and val in taken:
                continue
            values[i] = val
            yield from rec(i + 1, max(used, val + 1))

    yield from rec(0, 0)


def enumerate_boundary_assignments(variables, r: int, ig: InterferenceGraph,
                                   canonical: bool = False) -> Iterator[dict]:
    """All valid maps from ``variables`` to registers/SPILL, in a fixed order
    (variables sorted, SPILL before register 0 before 1 ...)."""
    names = tuple(sorted(variables))
    for values in _enumerate(names, r, _adjacency(ig), canonical=canonical):
        yield dict(zip(names, values))


def compatible(f1: Mapping[str, int], f2: Mapping[str, int]) -> bool:
    """True iff f1 and f2 agree on every variable both decide."""
    if len(f2) < len(f1):
        f1, f2 = f2, f1
    return all(f2[v] == x for v, x in f1.items() if v in f2)


def _canon(values: Sequence[int]) -> tuple:
    mapping: dict[int, int] = {}
    out = []
    for x in values:
        if x == SPILL:
            out.append(SPILL)
        else:
            if x not in mapping:
                mapping[x] = len(mapping)
            out.append(mapping[x])
    return tuple(out)


def canonicalize(f: Mapping[str, int], variable_order: Optional[Sequence[str]] = None) -> dict:
    """Relabel registers in first-use order along ``variable_order``
    (default: sorted names).  Spills are kept."""
    order = list(variable_order) if variable_order is not None else sorted(f)
    return dict(zip(order, _canon([f[v] for v in order])))


def is_valid(f: Mapping[str, int], ig: InterferenceGraph) -> bool:
    for e in ig.edges:
        u, v = tuple(e)
        if u in f and v in f and f[u] != SPILL and f[u] == f[v]:
            return False
    return True


# --- webs --------------------------------------------------------------------

def split_webs(info: LiveInfo) -> LiveInfo:
    """Rename each connected piece of a disconnected lifetime apart.

    The first piece (by smallest vertex id) keeps the name, later ones get
    ``name#2``, ``name#3``...  Connected lifetimes are left alone.
    """
    g = info.graph
    renames: dict[str, dict[int, str]] = {}
    for name, lt in lifetimes(info).items():
        if lt.connected:
            continue
        comp: dict[int, str] = {}
        k = 0
        for start in sorted(lt.vertices):
            if start in comp:
                continue
            k += 1
            label = name if k == 1 else f"{name}#{k}"
            comp[start] = label
            stack = [start]
            while stack:
                x = stack.pop()
                for y in g.succ[x] + g.pred[x]:
                    if y in lt.vertices and y not in comp:
                        comp[y] = label
                        stack.append(y)
        renames[name] = comp

    if not renames:
        return info

    def rename(vs, at):
        return frozenset(renames[v][at] if v in renames else v for v in vs)

    at_vertex = {v: rename(vs, v) for v, vs in info.at_vertex.items()}
    # L(e) is contained in L(source), so the source decides the piece
    at_edge = {e: rename(vs, e[0]) for e, vs in info.at_edge.items()}
    return LiveInfo(g, at_vertex, at_edge)


# --- the dynamic program -----------------------------------------------------

@dataclass
class RAResult:
    cost: object  # Fraction, int or INF
    assignment: Optional[dict]
    edge_costs: dict = field(default_factory=dict)
    registers: int = 0
    table_entries: int = 0

    @property
    def feasible(self) -> bool:
        return self.cost != INF

    def to_json(self) -> dict:
        return {
            "cost": "inf" if self.cost == INF else _json_number(self.cost),
            "assignment": None if self.assignment is None else {
                v: ("spill" if x == SPILL else x) for v, x in sorted(self.assignment.items())},
            "registers": self.registers,
        }


def _json_number(x):
    x = as_fraction(x)
    if x.denominator == 1:
        return int(x)
    return float(x) if _terminates(x) else str(x)


def _terminates(x: Fraction) -> bool:
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return d == 1


class _Allocator:
    def __init__(self, decomp: Decomposition, info: LiveInfo, ig: InterferenceGraph,
                 cm: CostModel, r: int, canonical: bool):
        if canonical and not cm.renaming_invariant:
            raise ValueError("canonical keys need a renaming-invariant cost model")
        self.decomp = decomp
        self.info = info
        self.cm = cm
        self.r = r
        self.canonical = canonical
        self.adj = _adjacency(ig)
        self.live_edge = {e: tuple(sorted(vs)) for e, vs in info.at_edge.items()}
        self.domains: dict[int, tuple] = {}
        self.tables: dict[int, dict] = {}
        self.backs: dict[int, dict] = {}

    def domain(self, node: DecompNode) -> tuple:
        d = self.domains.get(node.index)
        if d is None:
            vs = set()
            for v in node.boundary:
                vs |= self.info.at_vertex[v]
            d = self.domains[node.index] = tuple(sorted(vs))
        return d

    def key(self, raw: tuple) -> tuple:
        return _canon(raw) if self.canonical else raw

    def edge_cost(self, e: Edge, names: tuple, values: tuple):
        live = self.live_edge[e]
        pos = {v: i for i, v in enumerate(names)}
        try:
            vals = tuple(values[pos[v]] for v in live)
        except KeyError as exc:
            raise AssertionError(f"variable {exc} live on {e} missing from the DP state") from None
        return self.cm.edge_cost(e, live, vals)

    # node cases

    def atomic(self, node):
        dom = self.domain(node)
        (e,) = node.own_edges
        table, back = {}, {}
        for vals in _enumerate(dom, self.r, self.adj, canonical=self.canonical):
            c = self.edge_cost(e, dom, vals)
            if c != INF:
                table[vals] = c
                back[vals] = None
        return table, back

    def combine(self, node):
        a, b = node.children
        dom, da, db = self.domain(node), self.domain(a), self.domain(b)
        ta, tb = self.tables[a.index], self.tables[b.index]
        set_a, set_b = set(da), set(db)
        shared = [v for v in da if v in set_b]
        ia = [da.index(v) for v in shared]
        ib = [db.index(v) for v in shared]
        src = [(0, da.index(v)) if v in set_a else (1, db.index(v)) for v in dom]
        only_a = [i for i, v in enumerate(da) if v not in set_b]
        only_b = [j for j, v in enumerate(db) if v not in set_a]
        cross = [(i, j) for i in only_a for j in only_b if db[j] in self.adj.get(da[i], ())]
        common = sorted(shared_edges(node))

        buckets: dict[tuple, list] = {}
        for kb in sorted(tb):
            proj = tuple(kb[j] for j in ib)
            buckets.setdefault(_canon(proj) if self.canonical else proj, []).append(kb)

        table, back = {}, {}
        for ka in sorted(ta):
            ca = ta[ka]
            dup = sum((self.edge_cost(e, da, ka) for e in common), Fraction(0))
            if dup == INF:
                continue
            proj = tuple(ka[i] for i in ia)
            for kb in buckets.get(_canon(proj) if self.canonical else proj, ()):
                base = ca + tb[kb] - dup
                for kb2 in self._renamings(kb, ib, proj):
                    if any(ka[i] == kb2[j] != SPILL for i, j in cross):
                        continue
                    raw = tuple(ka[i] if side == 0 else kb2[i] for side, i in src)
                    k = self.key(raw)
                    if base < table.get(k, INF):
                        table[k] = base
                        back[k] = (ka, kb2, raw)
        return table, back

    def _renamings(self, kb: tuple, ib: list, target: tuple):
        """Ways to rename ``kb`` so it agrees with ``target`` on the shared
        positions.  Without canonical keys that is just ``kb`` itself."""
        if not self.canonical:
            yield kb
            return
        pi: dict[int, int] = {}
        for j, want in zip(ib, target):
            if kb[j] != SPILL:
                pi[kb[j]] = want
        loose = sorted({x for x in kb if x != SPILL and x not in pi})
        free = [x for x in range(self.r) if x not in pi.values()]
        for image in permutations(free, len(loose)):
            full = dict(pi)
            full.update(zip(loose, image))
            yield tuple(SPILL if x == SPILL else full[x] for x in kb)

    def loop(self, node):
        (a,) = node.children
        dom, da = self.domain(node), self.domain(a)
        ta = self.tables[a.index]
        set_a = set(da)
        extra = tuple(v for v in dom if v not in set_a)
        names = da + extra
        pos = {v: i for i, v in enumerate(names)}
        pick = [pos[v] for v in dom]
        frame = node.own_edges

        table, back = {}, {}
        for ka in sorted(ta):
            ca = ta[ka]
            fixed = dict(zip(da, ka))
            for ext in _enumerate(extra, self.r, self.adj, fixed=fixed):
                joint = ka + ext
                c = ca
                for e in frame:
                    c = c + self.edge_cost(e, names, joint)
                if c == INF:
                    continue
                raw = tuple(joint[i] for i in pick)
                k = self.key(raw)
                if c < table.get(k, INF):
                    table[k] = c
                    back[k] = (ka, raw)
        return table, back

    # driver

    def fill(self) -> None:
        for node in self.decomp.postorder:
            if node.is_leaf:
                t, bk = self.atomic(node)
            elif node.kind == LOOP:
                t, bk = self.loop(node)
            else:
                t, bk = self.combine(node)
            self.tables[node.index], self.backs[node.index] = t, bk

    def run(self) -> RAResult:
        self.fill()
        root = self.decomp.root
        entries = sum(len(t) for t in self.tables.values())
        table = self.tables[root.index]
        if not table:
            return RAResult(INF, None, registers=self.r, table_entries=entries)
        best = min(sorted(table), key=lambda k: table[k])
        f = self.reconstruct(best)
        for v in _all_vars(self.info):
            f.setdefault(v, SPILL)
        return RAResult(table[best], f, registers=self.r, table_entries=entries)

    def reconstruct(self, root_key: tuple) -> dict:
        f: dict[str, int] = {}
        stack = [(self.decomp.root, root_key)]
        while stack:
            node, concrete = stack.pop()
            dom = self.domain(node)
            for v, x in zip(dom, concrete):
                if f.setdefault(v, x) != x:
                    raise AssertionError(f"inconsistent decision for {v!r}; lifetimes disconnected?")
            entry = self.backs[node.index][self.key(concrete)]
            if entry is None:
                continue
            raw = entry[-1]
            tau = self._extend({x: y for x, y in zip(raw, concrete) if x != SPILL})
            kids = entry[:-1]
            for child, k in zip(node.children, kids):
                stack.append((child, tuple(SPILL if x == SPILL else tau[x] for x in k)))
        return f

    def _extend(self, partial: dict) -> dict:
        """Complete a partial register renaming to a permutation of range(r)."""
        rest_src = [x for x in range(self.r) if x not in partial]
        rest_dst = [x for x in range(self.r) if x not in set(partial.values())]
        full = dict(partial)
        full.update(zip(rest_src, rest_dst))
        return full


def _all_vars(info: LiveInfo) -> set:
    return set(program_variables(info.graph)) | set(info.variables)


def _require_connected(info: LiveInfo) -> InterferenceGraph:
    lts = lifetimes(info)
    bad = [n for n, lt in lts.items() if not lt.connected]
    if bad:
        raise ValueError("disconnected lifetimes for " + ", ".join(bad)
                         + "; rename them apart (see split_webs)")
    return interference_graph(lts)


@dataclass
class OptTable:
    """One node's table: boundary assignment -> cheapest cost inside the node."""

    domain: tuple
    entries: dict  # value tuple aligned with domain -> cost; absent means +inf

    def get(self, f: Mapping[str, int]):
        return self.entries.get(tuple(f[v] for v in self.domain), INF)

    def items(self):
        for key in sorted(self.entries):
            yield dict(zip(self.domain, key)), self.entries[key]

    def __len__(self):
        return len(self.entries)


def opt_tables(decomp: Decomposition, live: LiveInfo, cm: CostModel, r: int, *,
               canonical: bool = False) -> dict[int, OptTable]:
    """Every node's table, keyed by postorder index."""
    alloc = _Allocator(decomp, live, _require_connected(live), cm, r, canonical)
    alloc.fill()
    return {i: OptTable(alloc.domains[i], t) for i, t in alloc.tables.items()}


def min_cost_allocation(decomp: Decomposition, live: LiveInfo, cm: CostModel, r: int, *,
                        canonical: bool = False) -> RAResult:
    """Optimal assignment and its cost.  Every lifetime must be connected."""
    if r < 0:
        raise ValueError("register count must be non-negative")
    ig = _require_connected(live)
    result = _Allocator(decomp, live, ig, cm, r, canonical).run()
    if result.assignment is not None:
        recomputed, per_edge = total_cost(live, cm, result.assignment)
        if recomputed != result.cost:
            raise AssertionError(f"witness costs {recomputed}, table says {result.cost}")
        result.edge_costs = per_edge
    return result


@dataclass
class SpillFreeResult:
    feasible: bool
    assignment: Optional[dict]
    table_entries: int = 0
    early_exit: bool = False


def spill_free(decomp: Decomposition, live: LiveInfo, r: int, *,
               canonical: bool = True, early_exit: bool = True) -> SpillFreeResult:
    """Can every variable live somewhere stay in one of ``r`` registers?"""
    if early_exit and live.max_pressure() > r:
        return SpillFreeResult(False, None, 0, early_exit=True)
    res = min_cost_allocation(decomp, live, SpillFreeModel(), r, canonical=canonical)
    return SpillFreeResult(res.cost == 0, res.assignment if res.cost == 0 else None,
                           res.table_entries)


def min_registers(decomp: Decomposition, live: LiveInfo, r_max: int, *,
                  canonical: bool = True) -> Optional[int]:
    """Smallest spill-free r, scanning up from max |L(a)|; None past ``r_max``."""
    for r in range(live.max_pressure(), r_max + 1):
        if spill_free(decomp, live, r, canonical=canonical).feasible:
            return r
    return None
