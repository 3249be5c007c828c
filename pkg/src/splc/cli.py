"""``splc`` command-line driver.

Exit codes: 0 success, 1 negative verdict (infeasible, not closed), 2 usage
error, 3 input or parse error, 4 oracle budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from typing import Optional, Sequence

from . import lang, liveness, lospre, oracle, regalloc, spl
from .generate import program_from_seed

log = logging.getLogger("splc")

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


class NegativeVerdict(Exception):
    pass


# --- output helpers ----------------------------------------------------------

def _dumps(obj) -> str:
    try:
        return json.dumps(obj, indent=2)
    except RecursionError:
        pass
    # deeply nested trees (long statement chains) need a bigger stack
    out: list = []

    def work():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(1_000_000)
        try:
            out.append(json.dumps(obj, indent=2))
        finally:
            sys.setrecursionlimit(old)

    old_size = threading.stack_size(512 * 1024 * 1024)
    try:
        t = threading.Thread(target=work)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
    if not out:
        raise RuntimeError("JSON encoding failed")
    return out[0]


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _write_dot(args, dot: str) -> None:
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(dot)


# --- input -------------------------------------------------------------------

def _read_source(path: Optional[str]) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: bad {what} JSON: {exc}") from None


def _program(args, require_closed: bool):
    ast = lang.parse(_read_source(args.input))
    if require_closed and not lang.check_closed(ast):
        raise NegativeVerdict("program is not closed: break/continue outside a loop")
    g, d = spl.cfg_of(ast)
    return ast, g, d


def _liveness(g):
    info = liveness.compute_liveness(g)
    lts = liveness.lifetimes(info)
    split = liveness.disconnected(lts)
    if split:
        log.warning("renaming disconnected lifetimes apart: %s", ", ".join(split))
        info = regalloc.split_webs(info)
    return info


def _cost_model(args):
    if args.cost_file:
        try:
            return regalloc.SpillCostModel.from_json(_load_json(args.cost_file, "cost"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.cost_file}: {exc}") from None
    return regalloc.SpillCostModel()


def _instance(args, g):
    if args.instance:
        try:
            inst = lospre.LospreInstance.from_json(_load_json(args.instance, "instance"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.instance}: {exc}") from None
    else:
        costs = ({"edge_cost": lospre.CostK(1, 0), "vertex_cost": lospre.CostK(0, 1)}
                 if args.lexicographic else {})
        inst = lospre.derive_instance(g, lang.parse_expr(args.expr), **costs)
    try:
        inst.check(g)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return inst


def _assignment_text(f) -> str:
    if f is None:
        return "assignment: none\n"
    return "".join(f"{v}: {'spill' if x == regalloc.SPILL else 'r%d' % x}\n"
                   for v, x in sorted(f.items()))


# --- subcommands -------------------------------------------------------------

def cmd_parse(args) -> int:
    ast = lang.parse(_read_source(args.input))
    closed = lang.check_closed(ast)
    if args.format == "text":
        _emit(lang.pretty(ast) + f"# closed: {'yes' if closed else 'no'}")
    elif args.format == "json":
        _emit(_dumps({"ast": lang.ast_to_json(ast), "closed": closed}))
    else:
        raise InputError("parse has no DOT output")
    return EXIT_OK


def cmd_decompose(args) -> int:
    _, g, d = _program(args, require_closed=False)
    dot = spl.to_dot(g, "cfg") + spl.to_dot(d, "decomposition")
    _write_dot(args, dot)
    if args.format == "json":
        _emit(_dumps({"graph": spl.graph_to_json(g), "closed": spl.is_closed_graph(g),
                "decomposition": spl.decomposition_to_json(d)}))
    elif args.format == "dot":
        _emit(dot)
    else:
        lines = [f"vertices {len(g.vertices)}, edges {len(g.edges)}, "
                 f"closed {'yes' if spl.is_closed_graph(g) else 'no'}"]
        stack = [(d.root, 0)]
        while stack:
            node, depth = stack.pop()
            lines.append("  " * depth + f"{node.kind} {list(node.boundary)}")
            stack.extend((ch, depth + 1) for ch in reversed(node.children))
        _emit("\n".join(lines))
    return EXIT_OK


def cmd_liveness(args) -> int:
    _, g, _ = _program(args, require_closed=True)
    info, _, ig = liveness.analyse(g)
    dot = liveness.interference_to_dot(ig)
    _write_dot(args, dot)
    if args.format == "json":
        _emit(_dumps(liveness.liveness_to_json(info, ig)))
    elif args.format == "dot":
        _emit(dot)
    else:
        lines = [f"{v}: {' '.join(sorted(info.at_vertex[v]))}".rstrip()
                 for v in sorted(info.at_vertex)]
        lines.append("interference: " + ", ".join(f"{u}-{v}" for u, v in ig.to_json()))
        _emit("\n".join(lines))
    return EXIT_OK


def cmd_regalloc(args) -> int:
    _, g, d = _program(args, require_closed=True)
    info = _liveness(g)
    canonical = not args.no_canonical

    if args.min_registers:
        r = regalloc.min_registers(d, info, args.max, canonical=canonical)
        _emit(_dumps(r) if args.format == "json" else str(r if r is not None else "none"))
        if r is None:
            print(f"no spill-free allocation with at most {args.max} registers", file=sys.stderr)
            return EXIT_NEGATIVE
        return EXIT_OK

    if args.spill_free:
        res = regalloc.spill_free(d, info, args.registers, canonical=canonical)
        if args.format == "json":
            out = regalloc.RAResult(0 if res.feasible else regalloc.INF, res.assignment,
                                    registers=args.registers).to_json()
            out["feasible"] = res.feasible
            _emit(_dumps(out))
        else:
            _emit(f"feasible: {'yes' if res.feasible else 'no'}\n"
                  + _assignment_text(res.assignment))
        return EXIT_OK if res.feasible else EXIT_NEGATIVE

    res = regalloc.min_cost_allocation(d, info, _cost_model(args), args.registers)
    if args.format == "json":
        _emit(_dumps(res.to_json()))
    else:
        cost = "inf" if res.cost == regalloc.INF else lospre.format_number(res.cost)
        _emit(f"cost: {cost}\n" + _assignment_text(res.assignment))
    return EXIT_OK if res.feasible else EXIT_NEGATIVE


def _lospre_text(cost, life, calc) -> str:
    return (f"cost: {cost}\nlife set: {' '.join(map(str, sorted(life)))}\n"
            f"calculating set: {' '.join(f'{x}->{y}' for x, y in sorted(calc))}")


def cmd_lospre(args) -> int:
    _, g, d = _program(args, require_closed=True)
    res = lospre.solve(d, _instance(args, g))
    if args.format == "json":
        _emit(_dumps(res.to_json()))
    else:
        _emit(_lospre_text(res.cost, res.life_set, res.calculating_set))
    return EXIT_OK


def _budget(args) -> oracle.OracleBudget:
    if args.budget is None:
        return oracle.DEFAULT_BUDGET
    return oracle.OracleBudget(max_enumeration=args.budget)


def cmd_oracle(args) -> int:
    _, g, d = _program(args, require_closed=True)
    if args.problem == "ra":
        info = _liveness(g)
        cm = regalloc.SpillFreeModel() if args.spill_free else _cost_model(args)
        cost, f = oracle.brute_force_ra(g, info, cm, args.registers, _budget(args))
        if args.format == "json":
            _emit(_dumps(regalloc.RAResult(cost, f, registers=args.registers).to_json()))
        else:
            shown = "inf" if cost == regalloc.INF else lospre.format_number(cost)
            _emit(f"cost: {shown}\n" + _assignment_text(f))
        return EXIT_OK if cost != regalloc.INF else EXIT_NEGATIVE

    inst = _instance(args, g)
    cost, life = oracle.brute_force_lospre(g, inst, _budget(args))
    calc = lospre.calculating_set(g, inst.use, life, inst.invalidate)
    if args.format == "json":
        _emit(_dumps(lospre.LospreResult(cost, life, calc).to_json()))
    else:
        _emit(_lospre_text(cost, life, calc))
    return EXIT_OK


def cmd_gen(args) -> int:
    variables = [chr(ord("a") + i) for i in range(args.variables)]
    ast = program_from_seed(args.seed, max_vertices=args.max_vertices, variables=variables,
                            closed=not args.open)
    if args.format == "json":
        _emit(_dumps(lang.ast_to_json(ast)))
    else:
        _emit(lang.pretty(ast))
    return EXIT_OK


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splc", description="Structured-program CFGs, SPL "
                                "decompositions, register allocation and LOSPRE.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, func, help_, formats=("json", "text"), default="json", program=True):
        sp = sub.add_parser(name, help=help_)
        if program:
            sp.add_argument("input", nargs="?", help="program file (default: stdin)")
        sp.add_argument("-f", "--format", choices=formats, default=default)
        if "dot" in formats:
            sp.add_argument("--dot", metavar="FILE", help="also write DOT to FILE")
        sp.set_defaults(func=func, dot=None)
        return sp

    command("parse", cmd_parse, "print the AST and whether the program is closed")
    command("decompose", cmd_decompose, "build the CFG and its decomposition",
            formats=("json", "dot", "text"))
    command("liveness", cmd_liveness, "live sets and interference graph",
            formats=("json", "dot", "text"))

    ra = command("regalloc", cmd_regalloc, "optimal register allocation")
    mode = ra.add_mutually_exclusive_group()
    mode.add_argument("--spill-free", action="store_true",
                      help="decide whether r registers suffice without spilling")
    mode.add_argument("--min-registers", action="store_true",
                      help="smallest r with a spill-free allocation")
    mode.add_argument("--cost-file", metavar="FILE", help="JSON spill weights")
    ra.add_argument("-r", "--registers", type=int, help="register count")
    ra.add_argument("--max", type=int, help="upper bound for --min-registers")
    ra.add_argument("--no-canonical", action="store_true",
                    help="key spill-free tables by raw assignments")

    lo = command("lospre", cmd_lospre, "lifetime-optimal placement of an expression")
    _instance_args(lo)

    orc = sub.add_parser("oracle", help="brute-force reference solvers")
    osub = orc.add_subparsers(dest="problem", required=True)
    ora = osub.add_parser("ra", help="exhaustive register allocation")
    ora.add_argument("input", nargs="?")
    ora.add_argument("-f", "--format", choices=("json", "text"), default="json")
    ora.add_argument("-r", "--registers", type=int, required=True)
    omode = ora.add_mutually_exclusive_group()
    omode.add_argument("--cost-file", metavar="FILE")
    omode.add_argument("--spill-free", action="store_true")
    ora.add_argument("--budget", type=int, help="maximum number of assignments enumerated")
    ora.set_defaults(func=cmd_oracle, dot=None)
    olo = osub.add_parser("lospre", help="exhaustive LOSPRE")
    olo.add_argument("input", nargs="?")
    olo.add_argument("-f", "--format", choices=("json", "text"), default="json")
    olo.add_argument("--budget", type=int, help="maximum number of life sets enumerated")
    _instance_args(olo)
    olo.set_defaults(func=cmd_oracle, dot=None)

    gen = command("gen", cmd_gen, "seeded random program", default="text", program=False)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--max-vertices", type=int, default=12)
    gen.add_argument("--variables", type=int, default=4, choices=range(1, 27),
                     metavar="{1..26}")
    gen.add_argument("--open", action="store_true",
                     help="allow break/continue outside loops")
    return p


def _instance_args(sp) -> None:
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", metavar="FILE", help="instance JSON")
    src.add_argument("--expr", help="derive the instance from this expression")
    sp.add_argument("--lexicographic", action="store_true",
                    help="with --expr: count computations first, then lifetime length")


def _validate(p: argparse.ArgumentParser, args) -> None:
    if args.command == "regalloc":
        if args.min_registers:
            if args.max is None:
                p.error("--min-registers needs --max")
            if args.max < 0:
                p.error("--max must be non-negative")
        elif args.registers is None:
            p.error("-r/--registers is required")
        if args.registers is not None and args.registers < 0:
            p.error("register count must be non-negative")
    if getattr(args, "lexicographic", False) and not getattr(args, "expr", None):
        p.error("--lexicographic only applies to --expr")
    if getattr(args, "problem", None) == "ra" and args.registers < 0:
        p.error("register count must be non-negative")


def main(argv: Optional[Sequence[str]] = None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    _validate(p, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except lang.ParseError as exc:
        print(f"{args.input or '<stdin>'}:{exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NegativeVerdict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except oracle.BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
