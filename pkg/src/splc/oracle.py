"""Exhaustive reference solvers for small instances.

Nothing here goes through the decomposition: costs are evaluated directly
on the whole graph, so agreement with the dynamic programs is evidence
rather than a tautology.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import chain, combinations, product
from math import inf

from .liveness import InterferenceGraph, LiveInfo, interference_graph, lifetimes
from .lospre import CostK
from .spl import DecompNode, SplGraph


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleBudget:
    max_variables: int = 10
    max_vertices: int = 20
    max_registers: int = 8
    max_enumeration: int = 2_000_000

    def require(self, what: str, size: int, cap: int) -> None:
        if size > cap:
            raise BudgetExceeded(f"{what} {size} exceeds the oracle budget of {cap}")


DEFAULT_BUDGET = OracleBudget()


def brute_force_ra(g: SplGraph, live: LiveInfo, cm, r: int,
                   budget: OracleBudget = DEFAULT_BUDGET):
    """Minimum total cost over every total map variables -> registers | spill.

    Returns ``(cost, assignment)``; the assignment is the first minimiser in
    enumeration order, and ``(inf, None)`` if nothing is finite.
    """
    ig = interference_graph(lifetimes(live))
    names = sorted(ig.variables)
    budget.require("variable count", len(names), budget.max_variables)
    budget.require("register count", r, budget.max_registers)
    budget.require("assignment count", (r + 1) ** len(names), budget.max_enumeration)

    pos = {v: i for i, v in enumerate(names)}
    conflicts = [(pos[u], pos[v]) for u, v in (tuple(e) for e in ig.edges)]
    edges = [(e, tuple(sorted(live.at_edge[e]))) for e in sorted(g.edges)]
    best, best_f = inf, None
    for values in product(range(-1, r), repeat=len(names)):
        if any(values[i] == values[j] != -1 for i, j in conflicts):
            continue
        cost = Fraction(0)
        for e, vs in edges:
            cost = cost + cm.edge_cost(e, vs, tuple(values[pos[v]] for v in vs))
            if cost >= best:
                break
        if cost < best:
            best, best_f = cost, dict(zip(names, values))
    return best, best_f


def _subsets(items):
    items = list(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def _restricted_cost(edges, inst, life) -> CostK:
    p = s = Fraction(0)
    for x, y in edges:
        if (x not in life or x in inst.invalidate) and (y in inst.use or y in life):
            k = inst.c((x, y))
            p += k.primary
            s += k.secondary
    for v in life:
        k = inst.l(v)
        p += k.primary
        s += k.secondary
    return CostK(p, s)


def brute_force_lospre(g: SplGraph, inst, budget: OracleBudget = DEFAULT_BUDGET):
    """Minimum cost over every life set; returns ``(cost, L)``."""
    budget.require("vertex count", len(g.vertices), budget.max_vertices)
    budget.require("life-set count", 2 ** len(g.vertices), budget.max_enumeration)
    edges = sorted(g.edges)
    best = best_l = None
    for life in _subsets(sorted(g.vertices)):
        life = frozenset(life)
        k = _restricted_cost(edges, inst, life)
        if best is None or k < best:
            best, best_l = k, life
    return best, best_l


def brute_force_dp(node: DecompNode, inst, budget: OracleBudget = DEFAULT_BUDGET) -> list:
    """dp[u, X] by definition: minimum over life sets within the node's
    subgraph that meet its boundary in X (bit i = boundary[i])."""
    verts = sorted(node.vertex_set())
    budget.require("vertex count", len(verts), budget.max_vertices)
    edges = sorted(node.edge_set())
    table: list = [None] * 16
    for life in _subsets(verts):
        life = frozenset(life)
        mask = sum(1 << i for i, v in enumerate(node.boundary) if v in life)
        k = _restricted_cost(edges, inst, life)
        if table[mask] is None or k < table[mask]:
            table[mask] = k
    return table


def greedy_coloring_check(ig: InterferenceGraph, r: int, *, variables=None,
                          budget: OracleBudget = DEFAULT_BUDGET) -> bool:
    """Exact r-colourability by backtracking (most-constrained first).

    ``variables`` restricts the question to a subset, e.g. the variables
    with non-empty lifetimes.
    """
    names = sorted(ig.variables if variables is None else variables)
    adj = {v: set() for v in names}
    for e in ig.edges:
        u, v = tuple(e)
        if u in adj and v in adj:
            adj[u].add(v)
            adj[v].add(u)
    order = sorted(names, key=lambda v: (-len(adj[v]), v))
    colour: dict[str, int] = {}
    steps = 0

    def rec(i: int) -> bool:
        nonlocal steps
        steps += 1
        if steps > budget.max_enumeration:
            raise BudgetExceeded("colouring search exceeded the oracle budget")
        if i == len(order):
            return True
        v = order[i]
        used = {colour[w] for w in adj[v] if w in colour}
        # trying one fresh colour is enough: unused colours are interchangeable
        fresh_tried = False
        for c in range(r):
            if c in used:
                continue
            if c not in colour.values():
                if fresh_tried:
                    continue
                fresh_tried = True
            colour[v] = c
            if rec(i + 1):
                return True
            del colour[v]
        return False

    return rec(0)


def live_variables(live: LiveInfo) -> set:
    return {v for v, lt in lifetimes(live).items() if not lt.empty}


def spill_free_by_colouring(live: LiveInfo, r: int,
                            budget: OracleBudget = DEFAULT_BUDGET) -> bool:
    ig = interference_graph(lifetimes(live))
    return greedy_coloring_check(ig, r, variables=live_variables(live), budget=budget)
