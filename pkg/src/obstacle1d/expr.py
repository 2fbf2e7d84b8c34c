"""Small arithmetic expression language in the variables ``x`` and ``t``.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 'x' | 't' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``), which binds
tighter than ``*`` and ``/``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprError

UNARY_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
}
BINARY_FUNCS = {"max": np.maximum, "min": np.minimum}
VARIABLES = ("x", "t")


class Node:
    """Base class of the immutable expression tree."""

    def __call__(self, x, t):
        return evaluate(self, x, t)

    def __str__(self) -> str:
        return pretty_print(self)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    name: str
    args: tuple


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprError(f"unexpected character {src[bad]!r}", _byte_offset(src, bad))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


def _byte_offset(src: str, char_pos: int) -> int:
    return len(src[:char_pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise ExprError(msg, _byte_offset(self.src, tok[2]))

    def expect(self, text: str):
        tok = self.take()
        if tok[1] != text:
            self.fail(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, _ = tok = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(text, tok)
            if text in VARIABLES:
                return Var(text)
            self.fail(f"unknown identifier {text!r}", tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {text or 'end of input'!r}", tok)

    def call(self, name: str, tok) -> Node:
        if name not in UNARY_FUNCS and name not in BINARY_FUNCS:
            self.fail(f"unknown function {name!r}", tok)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        want = 1 if name in UNARY_FUNCS else 2
        if len(args) != want:
            self.fail(f"{name}() takes {want} argument(s), got {len(args)}", tok)
        return Call(name, tuple(args))


def parse_expression(src: str) -> Node:
    """Parse ``src`` into an expression tree."""
    if not isinstance(src, str) or not src.strip():
        raise ExprError("empty expression", 0)
    return _Parser(src).parse()


def pretty_print(node: Node) -> str:
    """Fully parenthesised text that parses back to an equal tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty_print(node.arg)})"
    if isinstance(node, BinOp):
        return f"({pretty_print(node.left)} {node.op} {pretty_print(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(pretty_print(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Node, x, t):
    """Vectorised evaluation; invalid operations produce nan/inf, never raise."""
    with np.errstate(all="ignore"):
        return _eval(node, np.asarray(x, dtype=float), np.asarray(t, dtype=float))


def _eval(node, x, t):
    if isinstance(node, Num):
        return np.full(np.broadcast(x, t).shape, node.value)
    if isinstance(node, Var):
        src = x if node.name == "x" else t
        return np.broadcast_to(src, np.broadcast(x, t).shape).astype(float)
    if isinstance(node, Neg):
        return -_eval(node.arg, x, t)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, t)
        b = _eval(node.right, x, t)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Call):
        vals = [_eval(arg, x, t) for arg in node.args]
        if node.name in UNARY_FUNCS:
            return UNARY_FUNCS[node.name](vals[0])
        return BINARY_FUNCS[node.name](vals[0], vals[1])
    raise TypeError(f"not an expression node: {node!r}")


def as_expr(value) -> Node:
    """Coerce numbers and strings to expression trees."""
    if isinstance(value, Node):
        return value
    if isinstance(value, (int, float, np.floating)):
        return Num(float(value)) if value >= 0 else Neg(Num(-float(value)))
    return parse_expression(str(value))
