"""
Scalars are either exact rationals (``fractions.Fraction``) or binary floats.

Every map carries an :class:`Arithmetic` that decides how its scalars are compared:
exact mode compares with no rounding, float mode with an absolute tolerance.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import math
from typing import Union

from imdyn.errors import MapSyntaxError

Scalar = Union[Fraction, float]


class Mode(str, Enum):
    EXACT = 'exact'
    FLOAT = 'float'


@dataclass(frozen=True)
class Arithmetic:
    mode: Mode = Mode.EXACT
    tolerance: float = 0.0

    @property
    def exact(self) -> bool:
        return self.mode is Mode.EXACT

    def coerce(self, value) -> Scalar:
        return Fraction(value) if self.exact else float(value)

    def eq(self, a: Scalar, b: Scalar) -> bool:
        if self.exact:
            return a == b
        return abs(a - b) <= self.tolerance

    def lt(self, a: Scalar, b: Scalar) -> bool:
        if self.exact:
            return a < b
        return a < b - self.tolerance

    def le(self, a: Scalar, b: Scalar) -> bool:
        if self.exact:
            return a <= b
        return a <= b + self.tolerance

    def gt(self, a: Scalar, b: Scalar) -> bool:
        return self.lt(b, a)

    def ge(self, a: Scalar, b: Scalar) -> bool:
        return self.le(b, a)

    def sign(self, a: Scalar) -> int:
        if self.lt(a, 0):
            return -1
        if self.gt(a, 0):
            return 1
        return 0


EXACT = Arithmetic()


def float_arithmetic(tolerance: float = 1e-12) -> Arithmetic:
    return Arithmetic(Mode.FLOAT, tolerance)


def parse_scalar(text: str) -> Fraction:
    """
    Parse a numeric literal into an exact rational
    :param text: A decimal (``0.65``, ``1e-3``) or rational (``13/20``) literal
    :return: The exact rational denoted by the literal
    """
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise MapSyntaxError(f'Invalid numeric literal: {text!r}')


def format_scalar(value: Scalar) -> str:
    """
    :param value: A scalar
    :return: ``p/q`` (or ``p``) for rationals, the shortest round-trip decimal for floats
    """
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def log_abs(value: Scalar) -> float:
    """Natural logarithm of |value| that does not overflow on huge rationals."""
    if isinstance(value, Fraction):
        return math.log(abs(value.numerator)) - math.log(value.denominator)
    return math.log(abs(value))


def exact_root(value: Fraction, n: int):
    """
    :param value: A positive rational
    :param n: The order of the root
    :return: The exact rational n-th root when it exists, None otherwise
    """
    if n == 1:
        return value

    def _int_root(k: int):
        guess = round(k ** (1.0 / n)) if k < 2 ** 1000 else round(math.exp(math.log(k) / n))
        for candidate in (guess - 1, guess, guess + 1):
            if candidate >= 0 and candidate ** n == k:
                return candidate
        return None

    numerator = _int_root(value.numerator)
    denominator = _int_root(value.denominator)
    if numerator is None or denominator is None:
        return None
    return Fraction(numerator, denominator)
