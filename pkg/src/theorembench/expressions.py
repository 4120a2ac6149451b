"""Exact evaluator for closed-form integer/rational expressions.

Grammar (whitespace-insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := postfix ('^' unary)?          # right-associative
    postfix := primary '!'*                  # binds tighter than '^'
    primary := INT | '(' expr ')' | '{' expr '}'

Values are int or Fraction; all arithmetic is exact. ``×``, ``·``,
``\\cdot`` and ``\\times`` normalize to ``*``; ``**`` normalizes to ``^``;
curly braces group like parentheses so LaTeX-ish answers such as
``2^{180} · 180!`` evaluate directly. Division is exact-rational,
never floor.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

Exact = Union[int, Fraction]


class ExpressionError(Exception):
    pass


class ParseError(ExpressionError):
    pass


class DomainError(ExpressionError):
    pass


# Guards against pathological operands in untrusted answers; generous
# compared to anything a legitimate closed form needs.
MAX_FACTORIAL_OPERAND = 100_000
MAX_EXPONENT_MAGNITUDE = 1_000_000

_NORMALIZE = (
    ("\\cdot", "*"),
    ("\\times", "*"),
    ("×", "*"),
    ("·", "*"),
    ("**", "^"),
)

_SINGLE_CHAR_TOKENS = set("+-*/^!(){}")


def _tokenize(text: str) -> list[str]:
    for old, new in _NORMALIZE:
        text = text.replace(old, new)
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        if ch in _SINGLE_CHAR_TOKENS:
            tokens.append(ch)
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r} at position {i}")
    return tokens


def _normalize(value: Exact) -> Exact:
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value)
    return value


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        token = self.peek()
        if token is None:
            raise ParseError("unexpected end of expression")
        self.pos += 1
        return token

    def expect(self, token: str) -> None:
        got = self.take()
        if got != token:
            raise ParseError(f"expected {token!r}, got {got!r}")

    def parse(self) -> Exact:
        value = self.expr()
        if self.peek() is not None:
            raise ParseError(f"trailing tokens starting at {self.peek()!r}")
        return value

    def expr(self) -> Exact:
        value = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> Exact:
        value = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op == "*":
                value = value * rhs
            else:
                if rhs == 0:
                    raise DomainError("division by zero")
                value = Fraction(value) / Fraction(rhs)
        return _normalize(value)

    def unary(self) -> Exact:
        if self.peek() == "-":
            self.take()
            return _normalize(-self.unary())
        return self.power()

    def power(self) -> Exact:
        base = self.postfix()
        if self.peek() == "^":
            self.take()
            exponent = self.unary()  # right-associative: 2^3^2 = 2^(3^2)
            return _pow(base, exponent)
        return base

    def postfix(self) -> Exact:
        value = self.primary()
        while self.peek() == "!":
            self.take()
            value = _factorial(value)
        return value

    def primary(self) -> Exact:
        token = self.take()
        if token == "(":
            value = self.expr()
            self.expect(")")
            return value
        if token == "{":
            value = self.expr()
            self.expect("}")
            return value
        if token.isdigit():
            return int(token)
        raise ParseError(f"unexpected token {token!r}")


def _factorial(value: Exact) -> int:
    if isinstance(value, Fraction):
        if value.denominator != 1:
            raise DomainError(f"factorial of non-integer {value}")
        value = int(value)
    if value < 0:
        raise DomainError(f"factorial of negative {value}")
    if value > MAX_FACTORIAL_OPERAND:
        raise DomainError(f"factorial operand {value} exceeds guard {MAX_FACTORIAL_OPERAND}")
    return math.factorial(value)


def _pow(base: Exact, exponent: Exact) -> Exact:
    if isinstance(exponent, Fraction):
        if exponent.denominator != 1:
            raise DomainError(f"non-integer exponent {exponent}")
        exponent = int(exponent)
    if abs(exponent) > MAX_EXPONENT_MAGNITUDE:
        raise DomainError(f"exponent magnitude {abs(exponent)} exceeds guard {MAX_EXPONENT_MAGNITUDE}")
    if exponent < 0:
        if base == 0:
            raise DomainError("zero to a negative power")
        return _normalize(Fraction(1) / Fraction(base) ** (-exponent))
    return _normalize(Fraction(base) ** exponent if isinstance(base, Fraction) else base**exponent)


def evaluate_expression(text: str) -> Exact:
    """Exact value of ``text``; raises ParseError or DomainError, never returns a float."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression")
    return _Parser(tokens).parse()
