"""Lexer, parser and pretty-printer for the structured mini-language.

Grammar::

    program := stmt { ";" stmt }
    stmt    := "skip" | "break" | "continue" | ident ":=" expr
             | "if" expr "then" program "else" program "fi"
             | "while" expr "do" program "od"

Sequencing is left-associative.  Expressions cover integer literals,
identifiers, ``+ - * /``, unary minus and the comparisons
``== != < <= > >=`` (non-associative, lowest precedence).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterator, Union

KEYWORDS = frozenset(
    {"skip", "break", "continue", "if", "then", "else", "fi", "while", "do", "od"}
)
COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|[-+*/<>;()])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        detail = f"{line}:{column}: {message}"
        if self.expected:
            detail += " (expected " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(detail)


Span = tuple[int, int]


# --- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Name:
    id: str
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Num:
    value: int
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = field(default=(0, 0), compare=False, repr=False)


Expr = Union[Name, Num, Neg, BinOp]


def expr_vars(e: Expr) -> frozenset[str]:
    """Identifiers referenced by ``e``."""
    out = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Name):
            out.add(x.id)
        elif isinstance(x, Neg):
            stack.append(x.operand)
        elif isinstance(x, BinOp):
            stack.append(x.left)
            stack.append(x.right)
    return frozenset(out)


def subexprs(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        if isinstance(x, Neg):
            stack.append(x.operand)
        elif isinstance(x, BinOp):
            stack.append(x.right)
            stack.append(x.left)


# --- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    target: str
    expr: Expr
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Break:
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Continue:
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    left: "Ast"
    right: "Ast"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Ast"
    orelse: "Ast"
    span: Span = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class While:
    cond: Expr
    body: "Ast"
    span: Span = field(default=(0, 0), compare=False, repr=False)


Ast = Union[Skip, Assign, Break, Continue, Seq, If, While]
ATOMIC_STMTS = (Skip, Assign, Break, Continue)


def children(node: Ast) -> tuple:
    if isinstance(node, Seq):
        return (node.left, node.right)
    if isinstance(node, If):
        return (node.then, node.orelse)
    if isinstance(node, While):
        return (node.body,)
    return ()


def iter_nodes(node: Ast) -> Iterator[Ast]:
    """Pre-order walk; iterative so long statement chains are fine."""
    stack = [node]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(children(x)))


def check_closed(ast: Ast) -> bool:
    """True iff every break/continue has an enclosing while loop."""
    stack = [(ast, 0)]
    while stack:
        node, depth = stack.pop()
        if isinstance(node, (Break, Continue)) and depth == 0:
            return False
        if isinstance(node, While):
            stack.append((node.body, depth + 1))
        else:
            stack.extend((c, depth) for c in children(node))
    return True


# --- lexer -------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "kw", "op", "eof"
    text: str
    start: int
    end: int


class _Source:
    def __init__(self, text: str):
        self.text = text
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        if text.isascii():
            self._bytes = None
        else:
            self._bytes = list(accumulate((len(ch.encode()) for ch in text), initial=0))

    def byte(self, i: int) -> int:
        return i if self._bytes is None else self._bytes[i]

    def position(self, i: int) -> tuple[int, int]:
        lo, hi = 0, len(self._line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._line_starts[mid] <= i:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, i - self._line_starts[lo] + 1


def tokenize(text: str) -> list[Token]:
    src = _Source(text)
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line, col = src.position(pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "ident" and m.group() in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), pos, m.end()))
        pos = m.end()
    out.append(Token("eof", "", n, n))
    return out


# --- parser ------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.src = _Source(text)
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def span(self, start: int, end: int) -> Span:
        return (self.src.byte(start), self.src.byte(end))

    def error(self, expected) -> ParseError:
        t = self.tok
        line, col = self.src.position(t.start)
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"unexpected {found}", line, col, expected)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error({repr(text)})
        t = self.tok
        self.i += 1
        return t

    def program(self, stop=("eof",)) -> Ast:
        left = self.stmt()
        while self.at(";"):
            self.i += 1
            right = self.stmt()
            left = Seq(left, right, (left.span[0], right.span[1]))
        t = self.tok
        if t.kind == "eof" and "eof" in stop or t.text in stop:
            return left
        raise self.error({"';'"} | {repr(s) if s != "eof" else "end of input" for s in stop})

    def stmt(self) -> Ast:
        t = self.tok
        if t.kind == "kw":
            if t.text in ("skip", "break", "continue"):
                self.i += 1
                cls = {"skip": Skip, "break": Break, "continue": Continue}[t.text]
                return cls(self.span(t.start, t.end))
            if t.text == "if":
                self.i += 1
                cond = self.expr()
                self.expect("then")
                then = self.program(stop=("else",))
                self.expect("else")
                orelse = self.program(stop=("fi",))
                end = self.expect("fi")
                return If(cond, then, orelse, self.span(t.start, end.end))
            if t.text == "while":
                self.i += 1
                cond = self.expr()
                self.expect("do")
                body = self.program(stop=("od",))
                end = self.expect("od")
                return While(cond, body, self.span(t.start, end.end))
        if t.kind == "ident":
            self.i += 1
            self.expect(":=")
            e = self.expr()
            return Assign(t.text, e, (self.src.byte(t.start), e.span[1]))
        raise self.error({"statement"})

    def expr(self) -> Expr:
        left = self.additive()
        t = self.tok
        if t.kind == "op" and t.text in COMPARISONS:
            self.i += 1
            right = self.additive()
            left = BinOp(t.text, left, right, (left.span[0], right.span[1]))
        return left

    def additive(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            right = self.term()
            left = BinOp(op, left, right, (left.span[0], right.span[1]))
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            right = self.unary()
            left = BinOp(op, left, right, (left.span[0], right.span[1]))
        return left

    def unary(self) -> Expr:
        t = self.tok
        if self.at("-"):
            self.i += 1
            operand = self.unary()
            return Neg(operand, (self.src.byte(t.start), operand.span[1]))
        if t.kind == "num":
            self.i += 1
            return Num(int(t.text), self.span(t.start, t.end))
        if t.kind == "ident":
            self.i += 1
            return Name(t.text, self.span(t.start, t.end))
        if self.at("("):
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error({"expression"})


def parse(source: str) -> Ast:
    """Parse a whole program.  Raises :class:`ParseError` on bad input."""
    return _Parser(source).program()


def parse_expr(source: str) -> Expr:
    p = _Parser(source)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error({"end of input"})
    return e


# --- pretty printing ---------------------------------------------------------

_PREC = {"+": 2, "-": 2, "*": 3, "/": 3}
_PREC.update({op: 1 for op in COMPARISONS})


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    return 4


def format_expr(e: Expr) -> str:
    if isinstance(e, Name):
        return e.id
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        if _prec(e.operand) < 4:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[e.op]
    left, right = format_expr(e.left), format_expr(e.right)
    # comparisons are non-associative; arithmetic is left-associative
    if _prec(e.left) < p or (p == 1 and _prec(e.left) == 1):
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


def pretty(ast: Ast, indent: str = "  ") -> str:
    """Render ``ast`` as source text that parses back to an equal tree."""
    lines: list[str] = []

    def emit(node, depth):
        # flatten the left spine of Seq so long chains do not recurse deeply
        stmts = []
        while isinstance(node, Seq):
            stmts.append(node.right)
            node = node.left
        stmts.append(node)
        stmts.reverse()
        for k, s in enumerate(stmts):
            sep = ";" if k < len(stmts) - 1 else ""
            pad = indent * depth
            if isinstance(s, If):
                lines.append(f"{pad}if {format_expr(s.cond)} then")
                emit(s.then, depth + 1)
                lines.append(f"{pad}else")
                emit(s.orelse, depth + 1)
                lines.append(f"{pad}fi{sep}")
            elif isinstance(s, While):
                lines.append(f"{pad}while {format_expr(s.cond)} do")
                emit(s.body, depth + 1)
                lines.append(f"{pad}od{sep}")
            elif isinstance(s, Seq):
                # no bracketing syntax exists, so a right-nested Seq would
                # re-parse with a different shape
                raise ValueError("right-nested sequence cannot be printed faithfully")
            else:
                lines.append(f"{pad}{_atomic_text(s)}{sep}")

    emit(ast, 0)
    return "\n".join(lines) + "\n"


def _atomic_text(s: Ast) -> str:
    if isinstance(s, Skip):
        return "skip"
    if isinstance(s, Break):
        return "break"
    if isinstance(s, Continue):
        return "continue"
    return f"{s.target} := {format_expr(s.expr)}"


def ast_to_json(node: Ast) -> dict:
    """JSON-friendly dump.  A ``Seq`` chain is flattened into ``items``
    (left-associated), so the nesting depth follows control structure only."""
    if isinstance(node, Seq):
        items = []
        while isinstance(node, Seq):
            items.append(node.right)
            node = node.left
        items.append(node)
        items.reverse()
        return {"kind": "Seq", "items": [ast_to_json(x) for x in items]}
    d: dict = {"kind": type(node).__name__, "span": list(node.span)}
    if isinstance(node, Assign):
        d.update(target=node.target, expr=format_expr(node.expr))
    elif isinstance(node, If):
        d.update(cond=format_expr(node.cond), then=ast_to_json(node.then),
                 orelse=ast_to_json(node.orelse))
    elif isinstance(node, While):
        d.update(cond=format_expr(node.cond), body=ast_to_json(node.body))
    return d
