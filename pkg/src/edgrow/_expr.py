"""Tiny expression grammar for rate-sequence definitions.

Kernel configs may define the separable factors b_k and a_j as strings such
as ``"k"``, ``"1 + 3/k"`` or ``"(k+2)^2 / (k+1)"``.  The grammar is
deliberately restricted to rational functions of a single integer variable
with real coefficients: numbers, one variable (spelled ``k``, ``j`` or
``l``), ``+ - * /``, integer powers via ``^`` (or ``**``) and parentheses.
Anything else is rejected at parse time, so configs can never inject code.
"""

from __future__ import annotations

import re
from typing import Callable, Union

import numpy as np

__all__ = ["RateExpressionError", "compile_rational"]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<var>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[()+\-*/^]))"
)

_VAR_NAMES = {"k", "j", "l", "n"}


class RateExpressionError(ValueError):
    """Raised when a rate expression does not fit the rational grammar."""


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise RateExpressionError(
                f"unexpected character {text[pos]!r} in rate expression {text!r}"
            )
        tokens.append(match.group().strip())
        pos = match.end()
    tokens.append("<end>")
    return tokens


class _Parser:
    """Recursive descent over: expr := term (('+'|'-') term)*,
    term := signed (('*'|'/') signed)*, signed := ('+'|'-')* power,
    power := atom (('^'|'**') signed_int)?, atom := number | var | '(' expr ')'.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str:
        return self.tokens[self.pos]

    def take(self) -> str:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        if self.take() != tok:
            raise RateExpressionError(f"expected {tok!r} in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek() != "<end>":
            raise RateExpressionError(f"trailing input in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            node = ("+" if op == "+" else "-", node, rhs)
        return node

    def term(self):
        node = self.signed()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.signed()
            node = (op, node, rhs)
        return node

    def signed(self):
        sign = 1
        while self.peek() in ("+", "-"):
            if self.take() == "-":
                sign = -sign
        node = self.power()
        if sign < 0:
            node = ("neg", node)
        return node

    def power(self):
        node = self.atom()
        if self.peek() in ("^", "**"):
            self.take()
            exponent = self.integer_exponent()
            node = ("pow", node, exponent)
        return node

    def integer_exponent(self) -> int:
        sign = 1
        while self.peek() in ("+", "-"):
            if self.take() == "-":
                sign = -sign
        tok = self.take()
        try:
            value = int(tok)
        except ValueError:
            raise RateExpressionError(
                f"exponent must be an integer, got {tok!r} in {self.text!r}"
            ) from None
        return sign * value

    def atom(self):
        tok = self.take()
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if re.fullmatch(r"[A-Za-z_]\w*", tok):
            if tok not in _VAR_NAMES:
                raise RateExpressionError(
                    f"unknown symbol {tok!r}; the only variable is the cluster index"
                )
            return ("var",)
        try:
            return ("const", float(tok))
        except ValueError:
            raise RateExpressionError(f"bad token {tok!r} in {self.text!r}") from None


def _evaluate(node, x: np.ndarray) -> np.ndarray:
    op = node[0]
    if op == "const":
        return np.full_like(x, node[1], dtype=float)
    if op == "var":
        return np.asarray(x, dtype=float)
    if op == "neg":
        return -_evaluate(node[1], x)
    if op == "pow":
        base = _evaluate(node[1], x)
        return base ** node[2]
    lhs = _evaluate(node[1], x)
    rhs = _evaluate(node[2], x)
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    if op == "/":
        return lhs / rhs
    raise AssertionError(f"unreachable node {node!r}")


def compile_rational(
    expression: Union[str, float, int]
) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a rational expression of one integer index into a vectorized map.

    Numbers are accepted directly and become constant maps.
    """
    if isinstance(expression, (int, float)):
        value = float(expression)
        return lambda x: np.full_like(np.asarray(x, dtype=float), value)
    tree = _Parser(str(expression)).parse()

    def evaluate(x):
        return _evaluate(tree, np.asarray(x, dtype=float))

    return evaluate
