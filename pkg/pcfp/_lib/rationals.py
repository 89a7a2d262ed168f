from fractions import Fraction


def parse_decimal(text: str) -> Fraction:
    """
    Parse a decimal literal (`"0.3"`, `"1"`, `"0.125"`) into an exact rational.

    The literal is read as `digits / 10^k`; binary floating point is never involved, so
    `parse_decimal("0.1") * 10 == 1` holds exactly.

    Raises:
        ValueError: If the text is not an unsigned decimal literal.
    """
    whole, dot, frac = text.partition(".")
    if not whole.isdigit() or (dot and not frac.isdigit()):
        raise ValueError(f"Not a decimal literal: {text!r}")

    return Fraction(int(whole + frac), 10 ** len(frac))


def format_decimal(value: Fraction) -> str | None:
    """
    Render a rational as a finite decimal literal.

    Returns:
        The shortest decimal literal denoting `value` exactly (`Fraction(1, 2)` -> `"0.5"`), or
        None if the value is negative or has no finite decimal expansion.
    """
    if value < 0:
        return None

    # A finite expansion exists iff the denominator has no prime factors besides 2 and 5.
    rest = value.denominator
    twos = 0
    fives = 0
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return None

    digits = max(twos, fives)
    scaled = value.numerator * 10**digits // value.denominator
    if digits == 0:
        return str(scaled)

    whole, frac = divmod(scaled, 10**digits)
    return f"{whole}.{frac:0{digits}d}".rstrip("0").rstrip(".")


def format_rational(value: Fraction) -> str:
    """Render a rational as `num/den`, or as a bare integer when the denominator is one."""
    if value.denominator == 1:
        return str(value.numerator)

    return f"{value.numerator}/{value.denominator}"
