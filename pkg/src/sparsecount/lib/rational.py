"""
Exact rational parameters.

Verdict-affecting parameters (epsilon, densities, delta) travel as
``fractions.Fraction`` everywhere. Text input must be an integer or a
``p/q`` string; decimal input is rejected so that no verdict depends on a
decimal-to-binary conversion.
"""
import re
from fractions import Fraction

from lib.errors import SparseCountError

_RATIONAL_RE = re.compile(r'^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$')


class RationalParseError(SparseCountError):
    """Raised when a value is not an exact rational."""
    pass


def parse_rational(value):
    """
    Parses an exact rational.

    Args:
        value: a ``Fraction``, an ``int`` or a string ``"p"`` / ``"p/q"``.

    Returns:
        Fraction: the parsed value.

    Raises:
        RationalParseError: for floats, decimal strings, zero denominators
                            or anything else that is not an exact rational.
    """
    if isinstance(value, bool):
        raise RationalParseError(f"Not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        match = _RATIONAL_RE.match(value)
        if not match:
            raise RationalParseError(f"Expected an integer or p/q, got {value!r}")
        numerator = int(match.group(1))
        denominator = int(match.group(2)) if match.group(2) is not None else 1
        if denominator == 0:
            raise RationalParseError(f"Zero denominator in {value!r}")
        return Fraction(numerator, denominator)
    raise RationalParseError(f"Expected an integer or p/q, got {value!r}")


def format_rational(value):
    """Formats a Fraction as ``p/q`` (or ``p`` for integers)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def min_qualifying_size(epsilon, n):
    """Smallest s >= 1 with s >= epsilon * n, compared exactly."""
    epsilon = Fraction(epsilon)
    p, q = epsilon.numerator, epsilon.denominator
    return max(1, -(-p * n // q))
