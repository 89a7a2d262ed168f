from fractions import Fraction

import pytest

from pcfp._lib.rationals import format_decimal
from pcfp._lib.rationals import format_rational
from pcfp._lib.rationals import parse_decimal


@pytest.mark.parametrize(
    "text,expected",
    [
        ("0.3", Fraction(3, 10)),
        ("0.5", Fraction(1, 2)),
        ("1", Fraction(1)),
        ("0.125", Fraction(1, 8)),
        ("1.0", Fraction(1)),
        ("0", Fraction(0)),
    ],
)
def test_parse_decimal(text: str, expected: Fraction) -> None:
    assert parse_decimal(text) == expected


def test_parse_decimal_is_exact() -> None:
    assert parse_decimal("0.1") * 10 == 1


@pytest.mark.parametrize("text", ["", "-1", "1.", ".5", "1e3", "0.x"])
def test_parse_decimal_raises_on_malformed_literal(text: str) -> None:
    with pytest.raises(ValueError, match="Not a decimal literal"):
        parse_decimal(text)


@pytest.mark.parametrize(
    "value,expected",
    [
        (Fraction(1, 2), "0.5"),
        (Fraction(3, 10), "0.3"),
        (Fraction(1), "1"),
        (Fraction(0), "0"),
        (Fraction(1, 8), "0.125"),
        (Fraction(7, 4), "1.75"),
        (Fraction(1, 20), "0.05"),
        (Fraction(3, 1), "3"),
    ],
)
def test_format_decimal(value: Fraction, expected: str) -> None:
    assert format_decimal(value) == expected


@pytest.mark.parametrize("value", [Fraction(1, 3), Fraction(3, 13), Fraction(-1, 2)])
def test_format_decimal_returns_none_without_finite_expansion(value: Fraction) -> None:
    assert format_decimal(value) is None


def test_format_rational() -> None:
    assert format_rational(Fraction(3, 13)) == "3/13"
    assert format_rational(Fraction(4, 2)) == "2"
    assert format_rational(Fraction(0)) == "0"
