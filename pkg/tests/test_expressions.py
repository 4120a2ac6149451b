from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from theorembench.expressions import (
    DomainError,
    ParseError,
    evaluate_expression,
)

from expression_oracle import random_expression


def test_integer_literal():
    assert evaluate_expression("42") == 42
    assert isinstance(evaluate_expression("42"), int)


def test_addition_and_precedence():
    assert evaluate_expression("2 + 3 * 4") == 14
    assert evaluate_expression("(2 + 3) * 4") == 20
    assert evaluate_expression("10 - 4 - 3") == 3  # left associative


def test_division_is_exact_rational():
    value = evaluate_expression("1 / 3")
    assert value == Fraction(1, 3)
    assert evaluate_expression("6 / 3") == 2
    assert isinstance(evaluate_expression("6 / 3"), int)


def test_power_right_associative():
    assert evaluate_expression("2^3^2") == 512
    assert evaluate_expression("(2^3)^2") == 64


def test_factorial_binds_tighter_than_power():
    # 2^3! is 2^(3!) = 64, not (2^3)! = 40320
    assert evaluate_expression("2^3!") == 64
    assert evaluate_expression("(2^3)!") == math.factorial(8)


def test_unary_minus():
    assert evaluate_expression("-5") == -5
    assert evaluate_expression("-(2 + 3)") == -5
    assert evaluate_expression("2 - -3") == 5
    assert evaluate_expression("-2^2") == -4  # unary applies after the power


def test_negative_exponent():
    assert evaluate_expression("2^-3") == Fraction(1, 8)
    assert evaluate_expression("(1/2)^-2") == 4


def test_latex_normalization():
    assert evaluate_expression("2 \\cdot 3") == 6
    assert evaluate_expression("2 \\times 3") == 6
    assert evaluate_expression("2 × 3") == 6
    assert evaluate_expression("2 · 3") == 6
    assert evaluate_expression("2 ** 10") == 1024


def test_curly_braces_group():
    assert evaluate_expression("2^{180} · 180!") == 2**180 * math.factorial(180)
    assert evaluate_expression("{2 + 3} * 4") == 20


def test_golden_cayley_value():
    value = evaluate_expression("2^(181-1) * (181-1)!")
    assert value == 2**180 * math.factorial(180)
    assert len(str(value)) == 384


def test_small_cayley_value():
    assert evaluate_expression("2^(5-1) * (5-1)!") == 384


def test_fraction_of_power():
    assert evaluate_expression("(10 * (10 - 1) / 2) / 2^10") == Fraction(45, 1024)


def test_factorial_of_fraction_rejected():
    with pytest.raises(DomainError):
        evaluate_expression("(1/2)!")


def test_factorial_of_negative_rejected():
    with pytest.raises(DomainError):
        evaluate_expression("(0 - 3)!")


def test_division_by_zero():
    with pytest.raises(DomainError):
        evaluate_expression("1 / 0")
    with pytest.raises(DomainError):
        evaluate_expression("1 / (2 - 2)")


def test_zero_to_negative_power():
    with pytest.raises(DomainError):
        evaluate_expression("0^-1")


def test_fractional_exponent_rejected():
    with pytest.raises(DomainError):
        evaluate_expression("2^(1/2)")


def test_factorial_guard():
    with pytest.raises(DomainError):
        evaluate_expression("100001!")


def test_exponent_guard():
    with pytest.raises(DomainError):
        evaluate_expression("2^1000001")


@pytest.mark.parametrize(
    "text",
    ["", "   ", "2 +", "(2", "2)", "2 2", "x + 1", "2..5", "^2", "2^", "{2", "\\sqrt{2}"],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        evaluate_expression(text)


def test_decimal_point_is_rejected():
    # the grammar is integer-only; decimals arrive via Fraction upstream
    with pytest.raises(ParseError):
        evaluate_expression("2.5")


def test_whitespace_insensitive():
    assert evaluate_expression(" 2^ ( 181 - 1 )   * (181-1) ! ") == evaluate_expression(
        "2^(181-1)*(181-1)!"
    )


def test_factorial_tower():
    assert evaluate_expression("3!!") == 720  # (3!)! = 6!


@given(st.integers(min_value=0, max_value=2**63))
def test_random_trees_match_oracle(seed):
    text, expected = random_expression(random.Random(seed))
    assert evaluate_expression(text) == expected


@settings(max_examples=40)
@given(st.integers(min_value=-(10**30), max_value=10**30))
def test_integer_round_trip(n):
    rendered = str(n) if n >= 0 else f"-{-n}"
    assert evaluate_expression(rendered) == n


@given(st.integers(min_value=1, max_value=500), st.integers(min_value=1, max_value=500))
def test_fraction_round_trip(p, q):
    assert evaluate_expression(f"{p} / {q}") == Fraction(p, q)
