"""Arithmetic expressions over ``n``, ``x`` and ``xi``.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names are the variables ``n``, ``x``, ``xi`` (also written ``ξ``) and the
constants ``i``, ``pi``, ``e``.  ``**`` is accepted as a synonym for ``^``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np
import sympy as sp

VARIABLES = ("n", "x", "xi")
CONSTANTS = {"i": 1j, "pi": np.pi, "e": np.e}
FUNCTIONS = {
    "sqrt": (np.sqrt, sp.sqrt),
    "exp": (np.exp, sp.exp),
    "log": (np.log, sp.log),
    "sin": (np.sin, sp.sin),
    "cos": (np.cos, sp.cos),
}
_ALIASES = {"ξ": "xi"}


class ExpressionError(ValueError):
    """Syntax or type error, annotated with line and column."""

    def __init__(self, message: str, text: str = "", pos: int | None = None):
        self.line = self.column = None
        if pos is not None:
            before = text[:pos]
            self.line = before.count("\n") + 1
            self.column = pos - (before.rfind("\n") + 1) + 1
            message = f"{message} at line {self.line}, column {self.column}"
        super().__init__(message)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Name, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-zξ_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        val = m.group(kind)
        start = m.start(kind)
        if kind == "op" and val == "**":
            val = "^"
        out.append((kind, val, start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, val: str):
        kind, v, pos = self.take()
        if v != val:
            found = "end of input" if kind == "end" else repr(v)
            raise ExpressionError(f"expected {val!r}, found {found}", self.text, pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {v!r}", self.text, pos)
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
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and v == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self) -> Node:
        kind, v, pos = self.take()
        if kind == "num":
            return Num(float(v))
        if kind == "name":
            v = _ALIASES.get(v, v)
            if v in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(v, arg)
            if v in VARIABLES or v in CONSTANTS:
                return Name(v)
            raise ExpressionError(f"unknown identifier {v!r}", self.text, pos)
        if v == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(v)
        raise ExpressionError(f"unexpected {found}", self.text, pos)


def parse(text: str) -> Node:
    if not isinstance(text, str):
        raise ExpressionError(f"expected an expression string, got {type(text).__name__}")
    return _Parser(text).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def emit(node: Node) -> str:
    """Text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({emit(node.arg)})"
    if isinstance(node, Neg):
        inner = emit(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 3 else f"-({inner})"
    p = _PREC[node.op]
    left, right = emit(node.left), emit(node.right)
    if node.op == "^":
        # right-associative; the base must be atomic
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def free_variables(node: Node) -> set[str]:
    if isinstance(node, Name):
        return {node.name} if node.name in VARIABLES else set()
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def evaluate(node: Node, **env) -> np.ndarray | complex:
    """Numerical value with complex arithmetic (principal branches)."""
    if isinstance(node, Num):
        return complex(node.value)
    if isinstance(node, Name):
        if node.name in CONSTANTS:
            return complex(CONSTANTS[node.name])
        if node.name not in env:
            raise ExpressionError(f"no value supplied for variable {node.name!r}")
        return np.asarray(env[node.name], dtype=complex)
    if isinstance(node, Neg):
        return -evaluate(node.arg, **env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func][0](evaluate(node.arg, **env))
    a, b = evaluate(node.left, **env), evaluate(node.right, **env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return np.power(a, b)


SYMPY_VARS = {"n": sp.Symbol("n", real=True), "x": sp.Symbol("x", real=True), "xi": sp.Symbol("xi", real=True)}


def to_sympy(node: Node) -> sp.Expr:
    if isinstance(node, Num):
        v = node.value
        return sp.Integer(int(v)) if float(v).is_integer() else sp.nsimplify(v, rational=True)
    if isinstance(node, Name):
        if node.name in SYMPY_VARS:
            return SYMPY_VARS[node.name]
        return {"i": sp.I, "pi": sp.pi, "e": sp.E}[node.name]
    if isinstance(node, Neg):
        return -to_sympy(node.arg)
    if isinstance(node, Call):
        return FUNCTIONS[node.func][1](to_sympy(node.arg))
    a, b = to_sympy(node.left), to_sympy(node.right)
    return {"+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b, "/": lambda: a / b, "^": lambda: a**b}[node.op]()


def constant_value(node: Node, text: str = "") -> complex:
    if free_variables(node):
        raise ExpressionError(f"expected a constant, found variables {sorted(free_variables(node))} in {text!r}")
    return complex(evaluate(node))
