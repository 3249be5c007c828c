"""Structured programs as series-parallel-loop graphs, with exact register
allocation and lifetime-optimal partial redundancy elimination over their
decompositions."""

from .lang import ParseError, parse, parse_expr, pretty
from .liveness import analyse, compute_liveness, interference_graph, lifetimes
from .lospre import CostK, LospreInstance, derive_instance, solve
from .regalloc import (SPILL, SpillCostModel, SpillFreeModel, canonicalize, min_cost_allocation,
                       min_registers, spill_free, split_webs)
from .spl import cfg_of

__all__ = [
    "SPILL", "CostK", "LospreInstance", "ParseError", "SpillCostModel", "SpillFreeModel",
    "analyse", "canonicalize", "cfg_of", "compute_liveness", "derive_instance",
    "interference_graph", "lifetimes", "min_cost_allocation", "min_registers", "parse",
    "parse_expr", "pretty", "solve", "spill_free", "split_webs",
]
