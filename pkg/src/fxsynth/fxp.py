"""Fixed-point numbers <M,L> and the integer operations the synthesized code uses.

A number is a signed integer mantissa ``m`` with a format ``<M, L>``; its value
is ``m * 2**-L``.  ``M`` is the weight of the most significant magnitude bit and
``P = M + L + 1`` the number of magnitude bits.  Storage adds one sign bit, so
mantissas use two's-complement range ``-2**P <= m < 2**P``.

Two truncation rules are used and nothing else:
  * real -> fixed conversion truncates toward zero (C integer cast);
  * alignment of intermediates is an arithmetic right shift (floor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import FxDomainError, FxOverflowError

WORD_BITS = 64
_WORD_MIN = -(1 << (WORD_BITS - 1))
_WORD_MAX = (1 << (WORD_BITS - 1)) - 1


def exact(v) -> Fraction:
    """Exact rational value of an int, float, numpy scalar or Fraction."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, Rational):
        return Fraction(int(v.numerator), int(v.denominator))
    f = float(v)
    if not math.isfinite(f):
        raise FxDomainError(f"non-finite value {v!r}")
    return Fraction(f)


def ufp(x) -> int:
    """Unit in the first place: floor(log2(x)) for x > 0, computed exactly."""
    if isinstance(x, float):
        if not x > 0 or not math.isfinite(x):
            raise FxDomainError(f"ufp undefined for {x!r}")
        return math.frexp(x)[1] - 1
    q = exact(x)
    if q <= 0:
        raise FxDomainError(f"ufp undefined for {x!r}")
    n, d = q.numerator, q.denominator
    e = n.bit_length() - d.bit_length()
    # 2**e is within a factor of two of n/d; fix the off-by-one.
    if (n << max(-e, 0)) < (d << max(e, 0)):
        e -= 1
    return e


@dataclass(frozen=True, order=True)
class FxFormat:
    M: int
    L: int

    def __post_init__(self):
        if not isinstance(self.M, int) or not isinstance(self.L, int):
            raise TypeError("format fields must be int")
        if self.L < 0:
            raise FxDomainError(f"negative fractional length in {self}")
        if self.P < 1:
            raise FxDomainError(f"format {self} has no magnitude bits")

    @property
    def P(self) -> int:
        return self.M + self.L + 1

    def fits(self, mantissa: int) -> bool:
        bound = 1 << self.P
        return -bound <= mantissa < bound

    def __str__(self) -> str:
        return f"<{self.M},{self.L}>"


ZERO_FORMAT = FxFormat(0, 0)


@dataclass(frozen=True)
class FxNum:
    mantissa: int
    format: FxFormat

    def __post_init__(self):
        m = int(self.mantissa)
        object.__setattr__(self, "mantissa", m)
        if m == 0 and self.format != ZERO_FORMAT:
            object.__setattr__(self, "format", ZERO_FORMAT)
        elif not self.format.fits(m):
            raise FxOverflowError(f"mantissa {m} does not fit {self.format}")

    @property
    def M(self) -> int:
        return self.format.M

    @property
    def L(self) -> int:
        return self.format.L

    def to_fraction(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.L)

    def __float__(self) -> float:
        return fixed_to_float(self)

    def __str__(self) -> str:
        return f"{self.mantissa}{self.format}"


ZERO = FxNum(0, ZERO_FORMAT)


def _check_word(m: int) -> int:
    if not _WORD_MIN <= m <= _WORD_MAX:
        raise FxOverflowError(f"mantissa {m} exceeds the {WORD_BITS}-bit working width")
    return m


def _shift(m: int, by: int) -> int:
    """Multiply by 2**by; negative ``by`` is an arithmetic (floor) right shift."""
    return m << by if by >= 0 else m >> -by


def float_to_fixed(v, fmt: FxFormat) -> FxNum:
    q = exact(v)
    if q == 0:
        return ZERO
    if ufp(abs(q)) > fmt.M:
        raise FxOverflowError(f"{v!r} needs M={ufp(abs(q))} but format is {fmt}")
    m = math.trunc(q * (1 << fmt.L))
    if m == 0:
        return ZERO
    return FxNum(_check_word(m), fmt)


def fixed_to_float(a: FxNum) -> float:
    return math.ldexp(a.mantissa, -a.L)


def align(a: FxNum, targetL: int) -> FxNum:
    """Re-express ``a`` with ``targetL`` fractional bits.

    The integer part keeps ``a.M``, except that a too-short format is widened to
    ``-targetL`` so at least one magnitude bit remains (a right-shifted negative
    value floors to ``-2**-targetL``).
    """
    if targetL < 0:
        raise FxDomainError("target fractional length must be >= 0")
    if a.mantissa == 0:
        return ZERO
    m = _check_word(_shift(a.mantissa, targetL - a.L))
    if m == 0:
        return ZERO
    return FxNum(m, FxFormat(max(a.M, -targetL), targetL))


def _narrow(m: int, target: FxFormat, what: str) -> FxNum:
    if m == 0:
        return ZERO
    if not target.fits(m):
        raise FxOverflowError(f"{what} result {m} does not fit {target}")
    return FxNum(m, target)


def fx_add(a: FxNum, b: FxNum, target: FxFormat) -> FxNum:
    """Sum at ``target``: exact at the finer operand grid, then one floor shift.

    Identical to aligning each operand first whenever neither is finer than
    target.L, which is the only case the evaluator and emitted code produce.
    """
    wide = max(a.L, b.L, target.L)
    m = _check_word(_check_word(_shift(a.mantissa, wide - a.L)) + _check_word(_shift(b.mantissa, wide - b.L)))
    return _narrow(_shift(m, target.L - wide), target, "addition")


def fx_mul(a: FxNum, b: FxNum, target: FxFormat) -> FxNum:
    """Product of the mantissas at L = a.L + b.L, then aligned to target.L.

    The exact product may need ``a.M + b.M + 1`` integer bits; any target M is
    accepted as long as the truncated result fits it.
    """
    raw = _check_word(a.mantissa * b.mantissa)
    m = _check_word(_shift(raw, target.L - (a.L + b.L)))
    return _narrow(m, target, "multiplication")


def fx_relu(a: FxNum) -> FxNum:
    return a if a.mantissa > 0 else ZERO


def fx_linear(a: FxNum) -> FxNum:
    return a


ACTIVATIONS = {"relu": fx_relu, "linear": fx_linear}
