"""Recursive-descent parser for scalar field expressions.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('-'|'+') factor | atom ('^' integer)?
    atom   := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
    var    := 'x' digits | 'x' | 'y' | 'z'
    func   := sin | cos | exp | tanh | atan | sqrt

Variables are one-based in the text (``x1``) and zero-based in the tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

FUNCTIONS = ("sin", "cos", "exp", "tanh", "atan", "sqrt")
_ALIASES = {"x": 0, "y": 1, "z": 2}


class ExpressionError(ValueError):
    """Raised for malformed field expressions."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Const, Var, Neg, Call, BinOp, Pow]


@dataclass(frozen=True)
class FieldExpr:
    """Parsed scalar field on R^dim (or a torus). Immutable."""

    root: Node
    dim: int

    def render(self) -> str:
        return render(self.root)

    def __str__(self) -> str:
        return self.render()

    def __add__(self, other: "FieldExpr") -> "FieldExpr":
        return combine(self, other, "+")

    def __sub__(self, other: "FieldExpr") -> "FieldExpr":
        return combine(self, other, "-")

    def __mul__(self, other: "FieldExpr") -> "FieldExpr":
        return combine(self, other, "*")

    def scaled(self, factor: float) -> "FieldExpr":
        return FieldExpr(BinOp("*", Const(float(factor)), self.root), self.dim)

    def shifted(self, offset) -> "FieldExpr":
        """Return the field x -> f(x + offset)."""
        offset = [float(o) for o in offset]
        if len(offset) != self.dim:
            raise ValueError("offset length must equal dim")
        return FieldExpr(_substitute_shift(self.root, offset), self.dim)

    def negated(self) -> "FieldExpr":
        return FieldExpr(Neg(self.root), self.dim)


def combine(f: FieldExpr, g: FieldExpr, op: str) -> FieldExpr:
    if f.dim != g.dim:
        raise ValueError(f"dimension mismatch: {f.dim} vs {g.dim}")
    return FieldExpr(BinOp(op, f.root, g.root), f.dim)


def _substitute_shift(node: Node, offset) -> Node:
    if isinstance(node, Var):
        if offset[node.index] == 0.0:
            return node
        return BinOp("+", node, Const(offset[node.index]))
    if isinstance(node, Const):
        return node
    if isinstance(node, Neg):
        return Neg(_substitute_shift(node.arg, offset))
    if isinstance(node, Call):
        return Call(node.func, _substitute_shift(node.arg, offset))
    if isinstance(node, Pow):
        return Pow(_substitute_shift(node.base, offset), node.exponent)
    return BinOp(node.op, _substitute_shift(node.left, offset),
                 _substitute_shift(node.right, offset))


def max_var_index(node: Node) -> int:
    """Largest zero-based variable index in the tree, -1 if none."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return -1
    if isinstance(node, (Neg, Call)):
        return max_var_index(node.arg)
    if isinstance(node, Pow):
        return max_var_index(node.base)
    return max(max_var_index(node.left), max_var_index(node.right))


# --------------------------------------------------------------------------
# rendering

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def render(node: Node) -> str:
    """Render a tree as text that parses back to an equal tree."""
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 else text
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"-({render(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({render(node.arg)})"
    if isinstance(node, Pow):
        return f"({render(node.base)})^{node.exponent}"
    left = render(node.left)
    right = render(node.right)
    if isinstance(node.left, BinOp) and _PREC[node.left.op] < _PREC[node.op]:
        left = f"({left})"
    if isinstance(node.right, BinOp) and (
        _PREC[node.right.op] < _PREC[node.op]
        or (_PREC[node.right.op] == _PREC[node.op])
    ):
        right = f"({right})"
    return f"{left} {node.op} {right}"


# --------------------------------------------------------------------------
# tokenizer + parser

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    end = len(text)
    while pos < end:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", end))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.next()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.next()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.next()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.next()
            arg = self.factor()
            return Neg(arg) if text == "-" else arg
        node = self.atom()
        if self.peek()[1] == "^":
            self.next()
            node = Pow(node, self.integer())
        return node

    def integer(self) -> int:
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.next()
            sign = -1 if text == "-" else 1
            kind, text, pos = self.peek()
        if kind == "op" and text == "(":
            # allow x^(-2)
            self.next()
            value = self.integer()
            self.expect(")")
            return sign * value
        if kind != "number" or not text.isdigit():
            raise ExpressionError(
                "exponent must be an integer literal (fractional powers are not supported)",
                pos,
            )
        self.next()
        return sign * int(text)

    def atom(self) -> Node:
        kind, text, pos = self.next()
        if kind == "number":
            return Const(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if text == "pi":
                return Const(math.pi)
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExpressionError(
                        f"function {text!r} takes exactly one argument in parentheses",
                        self.peek()[2],
                    )
                self.next()
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ExpressionError(
                        f"arity error: function {text!r} takes exactly one argument",
                        self.peek()[2],
                    )
                self.expect(")")
                return Call(text, arg)
            index = self._variable(text, pos)
            if index is not None:
                return Var(index)
            raise ExpressionError(f"unknown identifier {text!r}", pos)
        if kind == "end":
            raise ExpressionError("unexpected end of input", pos)
        raise ExpressionError(f"unexpected token {text!r}", pos)

    def _variable(self, name: str, pos: int):
        if name in _ALIASES:
            index = _ALIASES[name]
        elif re.fullmatch(r"x\d+", name):
            index = int(name[1:]) - 1
            if index < 0:
                raise ExpressionError(f"variable {name!r}: indices start at 1", pos)
        else:
            return None
        if index >= self.dim:
            raise ExpressionError(
                f"variable {name!r} out of range for dimension {self.dim}", pos
            )
        return index


def parse(text: str, dim: int) -> FieldExpr:
    """Parse ``text`` into a :class:`FieldExpr` on R^dim."""
    if not isinstance(dim, int) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    return FieldExpr(_Parser(text, dim).parse(), dim)
