"""Exact scalars: rationals, Gaussian rationals and angles measured in units of pi."""
from __future__ import annotations

from enum import Enum
from fractions import Fraction
from math import lcm

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _Q = Fraction

Rational = Fraction


def rat(x) -> Fraction:
    """Coerce ints, Fractions and "p/q" strings to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if type(x) is _Q:
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, GaussianRational):
        if x.im:
            raise ValueError(f"{x} is not real")
        return rat(x.re)
    raise TypeError(f"cannot make a rational from {x!r}")


def rat_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s) -> Fraction:
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise ValueError(f"expected a 'p/q' string, got {s!r}")
    return Fraction(s.strip())


class Ordering(Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class GaussianRational:
    """An element re + im*i of Q(i).  Parts are exact rationals."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is _Q else _Q(re)
        self.im = im if type(im) is _Q else _Q(im)

    @classmethod
    def _make(cls, re, im) -> GaussianRational:
        g = object.__new__(cls)
        g.re = re
        g.im = im
        return g

    @classmethod
    def coerce(cls, x) -> GaussianRational:
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, complex):
            raise TypeError("floating point complex numbers are not exact")
        return cls(x)

    def __add__(self, other):
        if type(other) is not GaussianRational:
            other = GaussianRational.coerce(other)
        return GaussianRational._make(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if type(other) is not GaussianRational:
            other = GaussianRational.coerce(other)
        return GaussianRational._make(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __mul__(self, other):
        if type(other) is not GaussianRational:
            other = GaussianRational.coerce(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return GaussianRational._make(a * c, b)
        return GaussianRational._make(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianRational._make(-self.re, -self.im)

    def __pos__(self):
        return self

    def inverse(self) -> GaussianRational:
        a, b = self.re, self.im
        if not b:
            if not a:
                raise ZeroDivisionError("inverse of 0 in Q(i)")
            return GaussianRational._make(1 / a, b)
        n = a * a + b * b
        return GaussianRational._make(a / n, -b / n)

    def __truediv__(self, other):
        if type(other) is not GaussianRational:
            other = GaussianRational.coerce(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        out = ONE
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def conjugate(self) -> GaussianRational:
        return GaussianRational._make(self.re, -self.im)

    def norm(self) -> Fraction:
        return rat(self.re * self.re + self.im * self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if type(other) is GaussianRational:
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction, _Q)):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"

    def to_json(self) -> dict:
        return {"re": rat_str(self.re), "im": rat_str(self.im)}

    @classmethod
    def from_json(cls, d) -> GaussianRational:
        if isinstance(d, dict):
            return cls(parse_rat(d["re"]), parse_rat(d.get("im", "0/1")))
        return cls(parse_rat(d))


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I = GaussianRational(0, 1)


class Angle:
    """The angle t*pi.

    Bounded angles live on the circle and are kept normalized to 0 <= t < 2.
    Unbounded angles are points of the universal cover and keep their t.
    """

    __slots__ = ("t", "bounded")

    def __init__(self, t, bounded: bool = True):
        t = rat(t)
        if bounded:
            t = t - 2 * (t // 2)
        self.t = t
        self.bounded = bounded

    @classmethod
    def lift(cls, t) -> Angle:
        return cls(t, bounded=False)

    def project(self) -> Angle:
        return Angle(self.t, bounded=True)

    def __add__(self, other):
        dt = other.t if isinstance(other, Angle) else rat(other)
        return Angle(self.t + dt, self.bounded)

    def __sub__(self, other):
        dt = other.t if isinstance(other, Angle) else rat(other)
        return Angle(self.t - dt, self.bounded)

    def __neg__(self):
        return Angle(-self.t, self.bounded)

    def __eq__(self, other):
        if not isinstance(other, Angle):
            return NotImplemented
        return self.t == other.t and self.bounded == other.bounded

    def __hash__(self):
        return hash((self.t, self.bounded))

    def __lt__(self, other):
        return angle_compare(self, other) is Ordering.LESS

    def __repr__(self):
        kind = "" if self.bounded else ", unbounded"
        return f"Angle({self.t}{kind})"

    def __float__(self):
        from math import pi
        return float(self.t) * pi

    def to_json(self) -> dict:
        return {"pi_multiple": rat_str(self.t)}

    @classmethod
    def from_json(cls, d, bounded: bool = True) -> Angle:
        return cls(parse_rat(d["pi_multiple"]), bounded)


def angle_normalize(a: Angle) -> Angle:
    return Angle(a.t, bounded=True)


def cos_sign(a) -> int:
    """Exact sign of cos(t*pi)."""
    t = a.t if isinstance(a, Angle) else rat(a)
    t = t - 2 * (t // 2)
    half = Fraction(1, 2)
    if t == half or t == 3 * half:
        return 0
    if half < t < 3 * half:
        return -1
    return 1


def sin_sign(a) -> int:
    t = a.t if isinstance(a, Angle) else rat(a)
    return cos_sign(t - Fraction(1, 2))


def angle_compare(a: Angle, b: Angle) -> Ordering:
    """Compare two angles.

    Bounded angles are compared through their representatives in [0, 2),
    i.e. the circle is cut at the direction 0.
    """
    if a.bounded != b.bounded:
        raise ValueError("cannot compare a bounded angle with an unbounded one")
    if a.t < b.t:
        return Ordering.LESS
    if a.t > b.t:
        return Ordering.GREATER
    return Ordering.EQUAL


class PolarCoeff:
    """A nonzero complex number modulus * exp(i * argument)."""

    __slots__ = ("modulus", "argument")

    def __init__(self, modulus, argument):
        modulus = rat(modulus)
        if modulus <= 0:
            raise ValueError("modulus must be positive")
        if not isinstance(argument, Angle):
            argument = Angle(argument)
        self.modulus = modulus
        self.argument = angle_normalize(argument)

    @property
    def arg_pi(self) -> Fraction:
        return self.argument.t

    def __eq__(self, other):
        if not isinstance(other, PolarCoeff):
            return NotImplemented
        return self.modulus == other.modulus and self.argument.t == other.argument.t

    def __hash__(self):
        return hash((self.modulus, self.argument.t))

    def __neg__(self):
        return PolarCoeff(self.modulus, self.argument + 1)

    def rotate(self, dt) -> PolarCoeff:
        return PolarCoeff(self.modulus, self.argument + dt)

    def __repr__(self):
        return f"PolarCoeff({self.modulus}, {self.argument.t}pi)"

    def __complex__(self):
        import cmath
        return self.modulus * cmath.exp(1j * float(self.argument))


def denominators_lcm(values) -> int:
    out = 1
    for v in values:
        out = lcm(out, rat(v).denominator)
    return out
