"""Helpers around ``mpmath.iv`` (outward-rounded real intervals)."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction

from mpmath import iv, libmp, mp

DEFAULT_BITS = 128
PRECISION_CAP = 4096


@contextmanager
def precision(bits: int):
    """Temporarily set the working precision of ``mpmath.iv``."""
    old = iv.prec
    iv.prec = max(int(bits), 53)
    try:
        yield
    finally:
        iv.prec = old


def escalating(start: int = DEFAULT_BITS, cap: int = PRECISION_CAP):
    """Yield doubling precisions ``start, 2·start, …`` up to ``cap``."""
    bits = start
    while bits <= cap:
        yield bits
        bits *= 2


def frac(q) -> "iv.mpf":
    q = Fraction(q)
    if q.denominator == 1:
        return iv.mpf(q.numerator)
    return iv.mpf(q.numerator) / iv.mpf(q.denominator)


def lo(x):
    return mp.make_mpf(x._mpi_[0])


def hi(x):
    return mp.make_mpf(x._mpi_[1])


def _raw_to_fraction(raw) -> Fraction:
    sgn, man, exp, _ = raw
    if not man:
        return Fraction(0)
    v = Fraction(int(man)) * (Fraction(2) ** int(exp))
    return -v if sgn else v


def lo_q(x) -> Fraction:
    """Exact lower endpoint as a Fraction."""
    return _raw_to_fraction(x._mpi_[0])


def hi_q(x) -> Fraction:
    return _raw_to_fraction(x._mpi_[1])


def width(x):
    return hi(x) - lo(x)


def certainly_positive(x) -> bool:
    return (x > 0) is True


def sign(x) -> int | None:
    """-1, 0, +1 when certain, ``None`` when the interval straddles zero."""
    if (x > 0) is True:
        return 1
    if (x < 0) is True:
        return -1
    if x.a == 0 and x.b == 0:
        return 0
    return None


def imax(values):
    """Interval enclosing the max of several intervals."""
    values = list(values)
    a = max(lo(v) for v in values)
    b = max(hi(v) for v in values)
    return iv.mpf([a, b])


def hull(values):
    values = list(values)
    return iv.mpf([min(lo(v) for v in values), max(hi(v) for v in values)])


def sqrt_fraction(q) -> "iv.mpf":
    return iv.sqrt(frac(q))


def to_strs(x, dps: int = 30) -> list[str]:
    """``[lo, hi]`` as decimal strings (serialization only)."""
    return [libmp.to_str(x._mpi_[0], dps), libmp.to_str(x._mpi_[1], dps)]


def contains(x, q) -> bool:
    q = Fraction(q)
    return lo_q(x) <= q <= hi_q(x)


@dataclass(frozen=True)
class ComplexInterval:
    """Rectangle ``re + i·im`` of real intervals."""

    re: object
    im: object

    def __add__(self, other):
        return ComplexInterval(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ComplexInterval(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        if isinstance(other, ComplexInterval):
            return ComplexInterval(self.re * other.re - self.im * other.im,
                                   self.re * other.im + self.im * other.re)
        return ComplexInterval(self.re * other, self.im * other)

    def conjugate(self):
        return ComplexInterval(self.re, -self.im)

    def abs2(self):
        return self.re ** 2 + self.im ** 2

    def abs(self):
        return iv.sqrt(self.abs2())

    def contains(self, z: complex) -> bool:
        return contains(self.re, Fraction(z.real)) and contains(self.im, Fraction(z.imag))

    def max_width(self):
        return max(width(self.re), width(self.im))


def mid(x):
    """Midpoint as an ``mp.mpf`` (display and float prefilters only)."""
    return (lo(x) + hi(x)) / 2
