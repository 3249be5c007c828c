"""Seeded random programs and optimisation instances for tests and the CLI."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Optional, Sequence

from .lang import (Assign, Ast, BinOp, Break, Continue, Expr, If, Name, Num, Seq, Skip,
                   While, check_closed)
from .lospre import CostK, LospreInstance
from .regalloc import SpillCostModel
from .spl import SplGraph, vertex_count

DEFAULT_VARIABLES = ("a", "b", "c", "d")


def random_expr(rng: random.Random, variables: Sequence[str], depth: int = 2) -> Expr:
    roll = rng.random()
    if depth <= 0 or roll < 0.45:
        if rng.random() < 0.8:
            return Name(rng.choice(variables))
        return Num(rng.randint(0, 9))
    return BinOp(rng.choice("+-*"), random_expr(rng, variables, depth - 1),
                 random_expr(rng, variables, depth - 1))


def _random_stmt(rng, variables, size, loops, open_jumps) -> Ast:
    roll = rng.random()
    if size >= 3 and roll < 0.2:
        return While(random_expr(rng, variables, 1),
                     _random_block(rng, variables, size - 2, loops + 1, open_jumps))
    if size >= 3 and roll < 0.4:
        left = rng.randint(1, size - 2)
        return If(random_expr(rng, variables, 1),
                  _random_block(rng, variables, left, loops, open_jumps),
                  _random_block(rng, variables, size - 1 - left, loops, open_jumps))
    if (loops or open_jumps) and roll < 0.5:
        return rng.choice((Break(), Continue()))
    if roll < 0.55:
        return Skip()
    return Assign(rng.choice(variables), random_expr(rng, variables))


def _random_block(rng, variables, size, loops, open_jumps) -> Ast:
    out = None
    while size > 0:
        part = rng.randint(1, size)
        stmt = _random_stmt(rng, variables, part, loops, open_jumps)
        out = stmt if out is None else Seq(out, stmt)
        size -= part
    return out if out is not None else Skip()


def random_program(rng: random.Random, *, max_vertices: int = 12,
                   variables: Sequence[str] = DEFAULT_VARIABLES,
                   size: Optional[int] = None, closed: bool = True) -> Ast:
    """A random program whose graph has at most ``max_vertices`` vertices.

    With ``closed=False`` break/continue may also appear outside loops, so
    the result may or may not be closed.
    """
    if max_vertices < 4:
        raise ValueError("every program graph has at least 4 vertices")
    while True:
        n = size if size is not None else rng.randint(1, max(1, max_vertices - 3))
        ast = _random_block(rng, list(variables), n, 0, not closed)
        if vertex_count(ast) <= max_vertices and (not closed or check_closed(ast)):
            return ast


def program_from_seed(seed: int, **kw) -> Ast:
    return random_program(random.Random(seed), **kw)


def large_program(n: int, seed: int = 0, variables: Sequence[str] = DEFAULT_VARIABLES) -> Ast:
    """A closed program with ``n`` simple statements, built without recursion.

    Roughly one statement in eight opens an if or while block; blocks close
    after a few statements, so nesting stays shallow and size stays linear.
    """
    rng = random.Random(seed)
    # each frame: [kind, cond, current, then_part]
    stack: list[list] = [["top", None, None, None]]

    def emit(stmt):
        frame = stack[-1]
        frame[2] = stmt if frame[2] is None else Seq(frame[2], stmt)

    def close():
        kind, cond, body, then = stack.pop()
        body = body if body is not None else Skip()
        if kind == "while":
            emit(While(cond, body))
        elif then is None:
            stack.append(["if", cond, None, body])
        else:
            emit(If(cond, then, body))

    emitted = 0
    while emitted < n:
        roll = rng.random()
        depth = len(stack) - 1
        if roll < 0.06 and depth < 6:
            stack.append(["while", random_expr(rng, variables, 1), None, None])
        elif roll < 0.12 and depth < 6:
            stack.append(["if", random_expr(rng, variables, 1), None, None])
        elif roll < 0.2 and depth > 0:
            close()
        else:
            loops = any(f[0] == "while" for f in stack)
            if loops and rng.random() < 0.02:
                emit(rng.choice((Break(), Continue())))
            else:
                emit(Assign(rng.choice(variables), random_expr(rng, variables)))
            emitted += 1
    while len(stack) > 1:
        close()
    return stack[0][2] if stack[0][2] is not None else Skip()


def random_lospre_instance(rng: random.Random, g: SplGraph, *,
                           lexicographic: bool = False, max_cost: int = 3) -> LospreInstance:
    verts = sorted(g.vertices)
    use = {v for v in verts if rng.random() < 0.35}
    inval = {v for v in verts if rng.random() < 0.25} | {g.s, g.t}

    def cost():
        if lexicographic:
            return CostK(rng.randint(0, max_cost), rng.randint(0, max_cost))
        return CostK(rng.randint(0, max_cost))

    return LospreInstance(
        frozenset(use), frozenset(inval), cost(), cost(),
        {e: cost() for e in sorted(g.edges) if rng.random() < 0.7},
        {v: cost() for v in verts if rng.random() < 0.7},
    )


def random_spill_weights(rng: random.Random, g: SplGraph, variables, max_weight: int = 4) -> SpillCostModel:
    weights = {(e, v): rng.randint(0, max_weight)
               for e in sorted(g.edges) for v in sorted(variables)}
    return SpillCostModel(Fraction(1), weights)
