"""Derived-measure expressions: tokenizer, recursive-descent parser, printer, evaluator.

Grammar::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-"? atom
    atom  := number | identifier | "(" expr ")"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union


class ExpressionError(ValueError):
    """Syntax or evaluation error. ``position`` is a 1-based column when known."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class MissingMeasureError(ExpressionError):
    def __init__(self, measure_id: str):
        self.measure_id = measure_id
        super().__init__(f"no value for measure {measure_id!r}")


class DivisionByZeroError(ExpressionError):
    pass


@dataclass(frozen=True)
class MeasureRef:
    id: str


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Negate:
    operand: "Expr"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[MeasureRef, Literal, Negate, BinaryOp]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op>[-+*/()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].isspace():
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinaryOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinaryOp(op, node, self.unary())
        return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            if self.peek()[0] == "num":
                return Literal(-self.number())
            return Negate(self.atom())
        return self.atom()

    def number(self):
        _, value, pos = self.take()
        number = float(value)
        if not math.isfinite(number):
            raise ExpressionError(f"literal {value!r} out of range", pos)
        return number

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            return Literal(self.number())
        self.take()
        if kind == "id":
            return MeasureRef(value)
        if value == "(":
            node = self.expr()
            kind, value, pos = self.take()
            if value != ")":
                raise ExpressionError("expected ')'", pos)
            return node
        if kind == "end":
            raise ExpressionError("unexpected end of expression", pos)
        raise ExpressionError(f"unexpected {value!r}", pos)


def parse_expression(text: str) -> Expr:
    if not text.strip():
        raise ExpressionError("empty expression")
    parser = _Parser(text)
    node = parser.expr()
    kind, value, pos = parser.peek()
    if kind != "end":
        raise ExpressionError(f"unexpected {value!r}", pos)
    return node


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def print_expression(node: Expr) -> str:
    """Inverse of :func:`parse_expression` on ASTs, with minimal parentheses."""
    if isinstance(node, MeasureRef):
        return node.id
    if isinstance(node, Literal):
        return repr(float(node.value))
    if isinstance(node, Negate):
        inner = print_expression(node.operand)
        if isinstance(node.operand, MeasureRef):
            return "-" + inner
        return f"-({inner})"
    prec = _PRECEDENCE[node.op]
    left = print_expression(node.left)
    if isinstance(node.left, BinaryOp) and _PRECEDENCE[node.left.op] < prec:
        left = f"({left})"
    right = print_expression(node.right)
    # equal precedence on the right would re-associate, so it needs parens too
    if isinstance(node.right, BinaryOp) and _PRECEDENCE[node.right.op] <= prec:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def referenced_measures(node: Expr) -> set[str]:
    if isinstance(node, MeasureRef):
        return {node.id}
    if isinstance(node, Literal):
        return set()
    if isinstance(node, Negate):
        return referenced_measures(node.operand)
    return referenced_measures(node.left) | referenced_measures(node.right)


def eval_expression(node: Expr, values: Mapping[str, float]) -> float:
    """Evaluate over 64-bit floats. Never returns NaN or infinity."""
    result = _eval(node, values)
    if not math.isfinite(result):
        raise ExpressionError(f"non-finite result for {print_expression(node)}")
    return result


def _eval(node, values):
    if isinstance(node, MeasureRef):
        try:
            return float(values[node.id])
        except KeyError:
            raise MissingMeasureError(node.id) from None
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Negate):
        return -_eval(node.operand, values)
    left = _eval(node.left, values)
    right = _eval(node.right, values)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0.0:
        raise DivisionByZeroError(f"division by zero in {print_expression(node)}")
    return left / right
