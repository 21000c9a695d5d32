"""
Exact Wigner 3j and 6j symbols and Clebsch-Gordan coefficients.

All quantum numbers are handled in units of one half (``HalfInt`` stores 2j),
and every symbol is returned as an :class:`ExactRadical`: a sign times the
square root of a rational in lowest terms. Phases follow the standard Racah
convention.
"""

from __future__ import annotations

import itertools
import logging
import math
import operator
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

logger = logging.getLogger(__name__)

#: Largest accepted 2j.
MAX_TWICE_J = 200

# n! for n = 0 .. 4 * MAX_TWICE_J + 2; immutable once built.
_FACTORIALS: tuple[int, ...] = tuple(
    itertools.accumulate(range(1, 4 * MAX_TWICE_J + 3), operator.mul, initial=1)
)

_HALF_INT_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


class QuantumNumberError(ValueError):
    """Raised for quantum numbers that are not valid (half-)integers."""

    pass


HalfIntLike = Union["HalfInt", int, Fraction, float, str]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer stored exactly as twice its value."""

    twice_value: int

    @classmethod
    def parse(cls, text: str) -> HalfInt:
        """Parse ``"3/2"``, ``"-1/2"`` or ``"2"``."""
        match = _HALF_INT_RE.match(text)
        if not match:
            raise QuantumNumberError(f"cannot parse '{text}' as a half-integer")
        numerator = int(match.group(1))
        denominator = int(match.group(2) or 1)
        if denominator == 0:
            raise QuantumNumberError(f"zero denominator in '{text}'")
        return cls.coerce(Fraction(numerator, denominator))

    @classmethod
    def coerce(cls, value: HalfIntLike) -> HalfInt:
        """Convert ints, Fractions, exact-half floats and strings."""
        if isinstance(value, HalfInt):
            return value
        if isinstance(value, bool):
            raise QuantumNumberError(f"{value!r} is not a quantum number")
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, int):
            return cls(2 * value)
        if isinstance(value, float):
            if not math.isfinite(value):
                raise QuantumNumberError(f"{value!r} is not a quantum number")
            value = Fraction(value)
        if isinstance(value, Fraction):
            twice = 2 * value
            if twice.denominator != 1:
                raise QuantumNumberError(f"{value} is not an integer or half-integer")
            return cls(int(twice))
        raise QuantumNumberError(f"unsupported quantum number type {type(value).__name__}")

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def as_fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    def __float__(self) -> float:
        return self.twice_value / 2

    def __neg__(self) -> HalfInt:
        return HalfInt(-self.twice_value)

    def __add__(self, other: HalfIntLike) -> HalfInt:
        return HalfInt(self.twice_value + HalfInt.coerce(other).twice_value)

    __radd__ = __add__

    def __sub__(self, other: HalfIntLike) -> HalfInt:
        return HalfInt(self.twice_value - HalfInt.coerce(other).twice_value)

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"


@dataclass(frozen=True)
class ExactRadical:
    """The exact real number ``sign * sqrt(radicand)``.

    Zero is canonically ``ExactRadical(0, Fraction(0))``.
    """

    sign: int
    radicand: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        radicand = Fraction(self.radicand)
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if radicand < 0:
            raise ValueError("radicand must be non-negative")
        if (self.sign == 0) != (radicand == 0):
            raise ValueError("sign is zero exactly when the radicand is zero")
        object.__setattr__(self, "radicand", radicand)

    @classmethod
    def zero(cls) -> ExactRadical:
        return cls(0, Fraction(0))

    @classmethod
    def from_rational(cls, value: Fraction | int) -> ExactRadical:
        value = Fraction(value)
        return cls(_sign(value), value * value)

    @classmethod
    def from_signed_square(cls, value: Fraction | int) -> ExactRadical:
        """Build ``sign(value) * sqrt(|value|)``."""
        value = Fraction(value)
        return cls(_sign(value), abs(value))

    @property
    def value_squared(self) -> Fraction:
        return self.radicand

    @property
    def signed_square(self) -> Fraction:
        return self.sign * self.radicand

    @property
    def is_rational(self) -> bool:
        return _is_square(self.radicand.numerator) and _is_square(self.radicand.denominator)

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is irrational")
        return self.sign * Fraction(
            math.isqrt(self.radicand.numerator), math.isqrt(self.radicand.denominator)
        )

    def __mul__(self, other: ExactRadical | Fraction | int) -> ExactRadical:
        if not isinstance(other, ExactRadical):
            other = ExactRadical.from_rational(other)
        return ExactRadical(self.sign * other.sign, self.radicand * other.radicand)

    __rmul__ = __mul__

    def __neg__(self) -> ExactRadical:
        return ExactRadical(-self.sign, self.radicand)

    def __bool__(self) -> bool:
        return self.sign != 0

    def __float__(self) -> float:
        return self.sign * math.sqrt(self.radicand)

    def __str__(self) -> str:
        if self.is_rational:
            return str(self.as_fraction())
        prefix = "-" if self.sign < 0 else ""
        return f"{prefix}√({self.radicand})"


def _sign(value: Fraction | int) -> int:
    return (value > 0) - (value < 0)


def _is_square(n: int) -> bool:
    return math.isqrt(n) ** 2 == n


def _factorial(n: int) -> int:
    return _FACTORIALS[n]


def _magnitude(value: HalfIntLike, label: str) -> int:
    twice = HalfInt.coerce(value).twice_value
    if twice < 0:
        raise QuantumNumberError(f"{label} must be non-negative, got {Fraction(twice, 2)}")
    if twice > MAX_TWICE_J:
        raise QuantumNumberError(
            f"{label} = {Fraction(twice, 2)} exceeds the supported range 2j <= {MAX_TWICE_J}"
        )
    return twice


def _projection(tj: int, value: HalfIntLike, label: str) -> int:
    tm = HalfInt.coerce(value).twice_value
    if abs(tm) > tj:
        raise QuantumNumberError(f"|{label}| = {Fraction(abs(tm), 2)} exceeds j = {Fraction(tj, 2)}")
    if (tj - tm) % 2:
        raise QuantumNumberError(f"{label} = {Fraction(tm, 2)} has the wrong parity for j = {Fraction(tj, 2)}")
    return tm


def _triangle(ta: int, tb: int, tc: int) -> bool:
    return abs(ta - tb) <= tc <= ta + tb and (ta + tb + tc) % 2 == 0


def _delta(ta: int, tb: int, tc: int) -> Fraction:
    """Triangle coefficient of three angular momenta given in twice units."""
    return Fraction(
        _factorial((ta + tb - tc) // 2)
        * _factorial((ta - tb + tc) // 2)
        * _factorial((-ta + tb + tc) // 2),
        _factorial((ta + tb + tc) // 2 + 1),
    )


def _from_sum(phase: int, series: Fraction, radicand: Fraction) -> ExactRadical:
    if series == 0 or radicand == 0:
        return ExactRadical.zero()
    sign = (-1) ** (phase % 2) * _sign(series)
    return ExactRadical(sign, series * series * radicand)


def triangle_ok(a: HalfIntLike, b: HalfIntLike, c: HalfIntLike) -> bool:
    """True iff ``|a-b| <= c <= a+b`` and ``a+b+c`` is an integer."""
    return _triangle(
        _magnitude(a, "a"), _magnitude(b, "b"), _magnitude(c, "c")
    )


def wigner_3j(
    j1: HalfIntLike,
    j2: HalfIntLike,
    j3: HalfIntLike,
    m1: HalfIntLike,
    m2: HalfIntLike,
    m3: HalfIntLike,
) -> ExactRadical:
    """
    Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)`` by the Racah formula.

    Returns zero when ``m1 + m2 + m3 != 0`` or the triangle rule fails.
    """
    tj1, tj2, tj3 = _magnitude(j1, "j1"), _magnitude(j2, "j2"), _magnitude(j3, "j3")
    tm1 = _projection(tj1, m1, "m1")
    tm2 = _projection(tj2, m2, "m2")
    tm3 = _projection(tj3, m3, "m3")

    if tm1 + tm2 + tm3 != 0 or not _triangle(tj1, tj2, tj3):
        return ExactRadical.zero()

    # Integer combinations that appear as factorial arguments.
    a = (tj1 + tj2 - tj3) // 2
    j1_minus_m1 = (tj1 - tm1) // 2
    j2_plus_m2 = (tj2 + tm2) // 2
    shift1 = (tj3 - tj2 + tm1) // 2
    shift2 = (tj3 - tj1 - tm2) // 2

    t_min = max(0, -shift1, -shift2)
    t_max = min(a, j1_minus_m1, j2_plus_m2)

    series = Fraction(0)
    for t in range(t_min, t_max + 1):
        series += Fraction(
            (-1) ** t,
            _factorial(t)
            * _factorial(shift1 + t)
            * _factorial(shift2 + t)
            * _factorial(a - t)
            * _factorial(j1_minus_m1 - t)
            * _factorial(j2_plus_m2 - t),
        )

    radicand = _delta(tj1, tj2, tj3)
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        radicand *= _factorial((tj + tm) // 2) * _factorial((tj - tm) // 2)

    return _from_sum((tj1 - tj2 - tm3) // 2, series, radicand)


def wigner_6j(
    j1: HalfIntLike,
    j2: HalfIntLike,
    j3: HalfIntLike,
    j4: HalfIntLike,
    j5: HalfIntLike,
    j6: HalfIntLike,
) -> ExactRadical:
    """
    Wigner 6j symbol ``{j1 j2 j3; j4 j5 j6}`` by the Racah formula.

    Zero when any of the triads (j1 j2 j3), (j1 j5 j6), (j4 j2 j6),
    (j4 j5 j3) violates the triangle rule.
    """
    tj = [
        _magnitude(value, f"j{index}")
        for index, value in enumerate((j1, j2, j3, j4, j5, j6), start=1)
    ]
    tj1, tj2, tj3, tj4, tj5, tj6 = tj
    triads = ((tj1, tj2, tj3), (tj1, tj5, tj6), (tj4, tj2, tj6), (tj4, tj5, tj3))
    if not all(_triangle(*triad) for triad in triads):
        return ExactRadical.zero()

    lows = [sum(triad) // 2 for triad in triads]
    highs = [
        (tj1 + tj2 + tj4 + tj5) // 2,
        (tj2 + tj3 + tj5 + tj6) // 2,
        (tj3 + tj1 + tj6 + tj4) // 2,
    ]

    series = Fraction(0)
    for t in range(max(lows), min(highs) + 1):
        denominator = 1
        for low in lows:
            denominator *= _factorial(t - low)
        for high in highs:
            denominator *= _factorial(high - t)
        series += Fraction((-1) ** t * _factorial(t + 1), denominator)

    radicand = Fraction(1)
    for triad in triads:
        radicand *= _delta(*triad)

    return _from_sum(0, series, radicand)


def clebsch_gordan(
    j1: HalfIntLike,
    j2: HalfIntLike,
    j: HalfIntLike,
    m1: HalfIntLike,
    m2: HalfIntLike,
    m: HalfIntLike,
) -> ExactRadical:
    """
    Clebsch-Gordan coefficient ``<j1 m1; j2 m2 | j m>``.

    Evaluated from its own summation formula rather than through
    :func:`wigner_3j`, so the two can be checked against each other via
    ``<j1 m1; j2 m2 | j m> = (-1)^(j1-j2+m) sqrt(2j+1) (j1 j2 j; m1 m2 -m)``.
    """
    tj1, tj2, tj = _magnitude(j1, "j1"), _magnitude(j2, "j2"), _magnitude(j, "j")
    tm1 = _projection(tj1, m1, "m1")
    tm2 = _projection(tj2, m2, "m2")
    tm = _projection(tj, m, "m")

    if tm1 + tm2 != tm or not _triangle(tj1, tj2, tj):
        return ExactRadical.zero()

    a = (tj1 + tj2 - tj) // 2
    j1_minus_m1 = (tj1 - tm1) // 2
    j2_plus_m2 = (tj2 + tm2) // 2
    shift1 = (tj - tj2 + tm1) // 2
    shift2 = (tj - tj1 - tm2) // 2

    k_min = max(0, -shift1, -shift2)
    k_max = min(a, j1_minus_m1, j2_plus_m2)

    series = Fraction(0)
    for k in range(k_min, k_max + 1):
        series += Fraction(
            (-1) ** k,
            _factorial(k)
            * _factorial(a - k)
            * _factorial(j1_minus_m1 - k)
            * _factorial(j2_plus_m2 - k)
            * _factorial(shift1 + k)
            * _factorial(shift2 + k),
        )

    radicand = (tj + 1) * Fraction(
        _factorial((tj + tj1 - tj2) // 2)
        * _factorial((tj - tj1 + tj2) // 2)
        * _factorial(a),
        _factorial((tj1 + tj2 + tj) // 2 + 1),
    )
    for twice_j, twice_m in ((tj, tm), (tj1, tm1), (tj2, tm2)):
        radicand *= _factorial((twice_j + twice_m) // 2) * _factorial((twice_j - twice_m) // 2)

    return _from_sum(0, series, radicand)
