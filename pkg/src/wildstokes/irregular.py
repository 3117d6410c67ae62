"""Exponential factors, circles, irregular classes and their Stokes combinatorics.

Convention: a factor is a finite sum of terms a * z**(-k) in a coordinate z
vanishing at the pole.  Along the ray of direction theta on sheet b the term
contributes a real part proportional to cos(arg a - k*(theta + 2*pi*b)); one
positive turn sends sheet b to sheet b + 1.  All angles are stored as rational
multiples of pi.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor
from typing import Iterable, NamedTuple

from .exact import Angle, PolarCoeff, cos_sign, denominators_lcm, parse_rat, rat, rat_str

HALF = Fraction(1, 2)


class NotRepresentableError(ValueError):
    """A coefficient left the rational polar form (irrational argument)."""


class CoverPoint(NamedTuple):
    circle: int
    sheet: int

    def __str__(self):
        return f"c{self.circle}s{self.sheet}"


def _norm2(t: Fraction) -> Fraction:
    return t - 2 * (t // 2)


def coeff_add(c1: PolarCoeff | None, c2: PolarCoeff | None) -> PolarCoeff | None:
    """Exact sum of two polar coefficients; None stands for 0."""
    if c1 is None:
        return c2
    if c2 is None:
        return c1
    a1, a2 = c1.argument.t, c2.argument.t
    if a1 == a2:
        return PolarCoeff(c1.modulus + c2.modulus, a1)
    if _norm2(a1 - a2) == 1:
        if c1.modulus == c2.modulus:
            return None
        if c1.modulus > c2.modulus:
            return PolarCoeff(c1.modulus - c2.modulus, a1)
        return PolarCoeff(c2.modulus - c1.modulus, a2)
    raise NotRepresentableError(
        f"sum of {c1} and {c2} has no rational polar form")


def diff_argument(c1: PolarCoeff | None, c2: PolarCoeff | None) -> Fraction:
    """Argument (in units of pi) of c1 - c2, which must be nonzero.

    Exact whenever the two coefficients are collinear or have equal moduli.
    """
    if c2 is None:
        return c1.argument.t
    if c1 is None:
        return _norm2(c2.argument.t + 1)
    a1, a2 = c1.argument.t, c2.argument.t
    if a1 == a2:
        if c1.modulus == c2.modulus:
            raise ValueError("difference is zero")
        return a1 if c1.modulus > c2.modulus else _norm2(a1 + 1)
    if _norm2(a1 - a2) == 1:
        return a1
    if c1.modulus == c2.modulus:
        # e^{ia} - e^{ib} = 2 sin(delta/2) e^{i(a + delta/2 - pi/2)}, delta = b - a in (0, 2pi)
        delta = _norm2(a2 - a1)
        return _norm2(a1 + delta / 2 - HALF)
    raise NotRepresentableError(
        f"difference of {c1} and {c2} has an argument that is not a rational multiple of pi")


@dataclass(frozen=True)
class ExponentialFactor:
    """Terms (k, coeff) with strictly decreasing positive exponents k."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((rat(k), c) for k, c in self.terms)
        for idx, (k, c) in enumerate(terms):
            if k <= 0:
                raise ValueError("exponents must be positive")
            if not isinstance(c, PolarCoeff):
                raise TypeError("coefficients must be PolarCoeff")
            if idx and terms[idx - 1][0] <= k:
                raise ValueError("exponents must be strictly decreasing")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, *terms) -> ExponentialFactor:
        """Build from (k, modulus, arg_pi) triples in any order."""
        ts = sorted(((rat(k), PolarCoeff(m, Angle(a))) for k, m, a in terms),
                    key=lambda t: -t[0])
        return cls(tuple(ts))

    @property
    def slope(self) -> Fraction:
        return self.terms[0][0] if self.terms else Fraction(0)

    @property
    def ram(self) -> int:
        return denominators_lcm(k for k, _ in self.terms)

    def is_tame(self) -> bool:
        return not self.terms

    def coeff(self, k) -> PolarCoeff | None:
        for kk, c in self.terms:
            if kk == k:
                return c
        return None

    def __neg__(self):
        return ExponentialFactor(tuple((k, -c) for k, c in self.terms))

    def __add__(self, other: ExponentialFactor) -> ExponentialFactor:
        ks = sorted({k for k, _ in self.terms} | {k for k, _ in other.terms}, reverse=True)
        out = []
        for k in ks:
            c = coeff_add(self.coeff(k), other.coeff(k))
            if c is not None:
                out.append((k, c))
        return ExponentialFactor(tuple(out))

    def __sub__(self, other):
        return self + (-other)

    def shift_sheet(self, b: int) -> ExponentialFactor:
        """Continue the factor b times around the positive direction."""
        if not b:
            return self
        return ExponentialFactor(tuple((k, c.rotate(-2 * k * b)) for k, c in self.terms))

    def truncate(self, k) -> ExponentialFactor:
        """Keep only the terms of exponent > k."""
        k = rat(k)
        return ExponentialFactor(tuple(t for t in self.terms if t[0] > k))

    def arg_key(self) -> tuple:
        return tuple(c.argument.t for _, c in self.terms)

    def sort_key(self) -> tuple:
        return tuple((-k, c.argument.t, c.modulus) for k, c in self.terms)

    def to_json(self) -> list:
        return [{"k": rat_str(k), "modulus": rat_str(c.modulus), "arg_pi": rat_str(c.argument.t)}
                for k, c in self.terms]

    @classmethod
    def from_json(cls, terms) -> ExponentialFactor:
        return cls.of(*((parse_rat(t["k"]), parse_rat(t["modulus"]), parse_rat(t["arg_pi"]))
                        for t in terms))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for k, c in self.terms:
            parts.append(f"{c.modulus}e^({c.argument.t}pi i)z^(-{k})")
        return " + ".join(parts)


def lead_difference(f: ExponentialFactor, g: ExponentialFactor):
    """Leading datum (kappa, psi) of f - g, psi in units of pi; None if f == g."""
    ks = sorted({k for k, _ in f.terms} | {k for k, _ in g.terms}, reverse=True)
    for k in ks:
        a, b = f.coeff(k), g.coeff(k)
        if a == b:
            continue
        return k, diff_argument(a, b)
    return None


@dataclass(frozen=True)
class Circle:
    rep: ExponentialFactor
    ram: int
    slope: Fraction

    def sheet(self, b: int) -> ExponentialFactor:
        return sheet_determination(self, b)

    def __str__(self):
        return f"<{self.rep}>"


def make_circle(q: ExponentialFactor) -> Circle:
    ram = q.ram
    best = min((q.shift_sheet(b) for b in range(ram)), key=lambda f: f.arg_key())
    return Circle(best, ram, q.slope)


TAME = make_circle(ExponentialFactor())


def sheet_determination(c: Circle, b: int) -> ExponentialFactor:
    if not 0 <= b < c.ram:
        raise ValueError(f"sheet {b} out of range for ramification {c.ram}")
    return c.rep.shift_sheet(b)


def sheet_of(c: Circle, q: ExponentialFactor) -> int:
    for b in range(c.ram):
        if c.rep.shift_sheet(b) == q:
            return b
    raise ValueError(f"{q} is not a sheet of {c}")


class IrregularClass:
    """A finite multiset of circles."""

    def __init__(self, entries: Iterable):
        merged: dict[Circle, int] = {}
        for c, m in entries:
            if not isinstance(c, Circle):
                c = make_circle(c)
            m = int(m)
            if m <= 0:
                raise ValueError("multiplicities must be positive")
            merged[c] = merged.get(c, 0) + m
        self.entries = tuple(merged.items())

    @classmethod
    def of(cls, *factors_with_mult) -> IrregularClass:
        return cls(factors_with_mult)

    @property
    def circles(self):
        return [c for c, _ in self.entries]

    @property
    def rank(self) -> int:
        return sum(c.ram * m for c, m in self.entries)

    def multiplicity(self, c: Circle) -> int:
        for cc, m in self.entries:
            if cc == c:
                return m
        return 0

    def index_of(self, c: Circle) -> int:
        for idx, (cc, _) in enumerate(self.entries):
            if cc == c:
                return idx
        raise KeyError(c)

    def has_tame(self) -> bool:
        return any(c == TAME for c, _ in self.entries)

    def __eq__(self, other):
        if not isinstance(other, IrregularClass):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)

    def __hash__(self):
        return hash(frozenset(self.entries))

    def __repr__(self):
        parts = [f"{m}*{c}" if m > 1 else str(c) for c, m in self.entries]
        return "IrregularClass(" + " + ".join(parts) + ")"

    def to_json(self) -> list:
        return [{"multiplicity": m, "terms": c.rep.to_json()} for c, m in self.entries]

    @classmethod
    def from_json(cls, data) -> IrregularClass:
        if not isinstance(data, list):
            raise ValueError("a class is a list of circles")
        return cls((make_circle(ExponentialFactor.from_json(e["terms"])), e["multiplicity"])
                   for e in data)


def fiber(theta: IrregularClass, d=None) -> list[CoverPoint]:
    """All points of the cover over a direction (the same labels everywhere)."""
    return [CoverPoint(ci, s) for ci, (c, _) in enumerate(theta.entries) for s in range(c.ram)]


def cover_monodromy(theta: IrregularClass) -> dict:
    """The sheet shift b -> b+1 induced by one positive turn."""
    return {CoverPoint(ci, s): CoverPoint(ci, (s + 1) % c.ram)
            for ci, (c, _) in enumerate(theta.entries) for s in range(c.ram)}


class Fiber:
    """Fiber data of a finite cover of the circle of directions.

    Labels are arbitrary hashables; each carries its sheet determination,
    its multiplicity and its image under the monodromy shift.  Comparisons at
    an unbounded angle use the label chart continued along the universal
    cover, so that labels are continuous in the angle.
    """

    def __init__(self, labels, factors, mults, shift):
        self.labels = list(labels)
        self.factors = dict(factors)
        self.mults = dict(mults)
        self.shift = dict(shift)
        self.inv_shift = {v: k for k, v in self.shift.items()}
        self._lead = {}

    @classmethod
    def of_class(cls, theta: IrregularClass) -> Fiber:
        labels = fiber(theta)
        factors = {p: theta.entries[p.circle][0].sheet(p.sheet) for p in labels}
        mults = {p: theta.entries[p.circle][1] for p in labels}
        return cls(labels, factors, mults, cover_monodromy(theta))

    def __len__(self):
        return len(self.labels)

    @property
    def rank(self) -> int:
        return sum(self.mults.values())

    def lead(self, i, j):
        key = (i, j)
        if key not in self._lead:
            self._lead[key] = lead_difference(self.factors[i], self.factors[j])
        return self._lead[key]

    def compare(self, i, j, t) -> int:
        """-1 if i <_t j, +1 if i >_t j, 0 if oscillatory (t in units of pi)."""
        ld = self.lead(i, j)
        if ld is None:
            raise ValueError(f"{i} and {j} coincide; their difference is identically 0")
        kappa, psi = ld
        return cos_sign(psi - kappa * t)

    def order_at(self, t) -> list:
        """Labels sorted increasingly by dominance at the (unbounded) angle t."""
        def cmp(i, j):
            s = self.compare(i, j, t)
            if s == 0:
                raise OscillatoryError(i, j, t)
            return s
        out = sorted(self.labels, key=functools.cmp_to_key(cmp))
        for a in range(len(out)):
            for b in range(a + 1, len(out)):
                if self.compare(out[a], out[b], t) != -1:
                    raise AssertionError("dominance relation is not transitive")
        return out

    def pair_directions(self, i, j, residue, lo, width=2) -> list:
        """Angles t in [lo, lo+width) with psi - kappa t = residue (mod 2)."""
        ld = self.lead(i, j)
        if ld is None:
            return []
        kappa, psi = ld
        c = psi - residue
        # t = (c - 2n)/kappa with lo <= t < lo + width
        n_max = floor((c - kappa * lo) / 2)
        n_min = ceil((c - kappa * (lo + width)) / 2)
        out = []
        for n in range(n_min, n_max + 1):
            t = (c - 2 * n) / kappa
            if lo <= t < lo + width:
                out.append(t)
        return out

    def pairs(self, same_part=None):
        for a, i in enumerate(self.labels):
            for j in self.labels[a + 1:]:
                if same_part is None or same_part(i, j):
                    yield i, j

    def stokes_directions(self, lo=Fraction(0), same_part=None) -> list:
        out = set()
        for i, j in self.pairs(same_part):
            out.update(self.pair_directions(i, j, HALF, lo))
            out.update(self.pair_directions(i, j, -HALF, lo))
        return sorted(out)

    def singular_directions(self, lo=Fraction(0), same_part=None) -> list:
        out = set()
        for i, j in self.pairs(same_part):
            out.update(self.pair_directions(i, j, 1, lo))
            out.update(self.pair_directions(j, i, 1, lo))
        return sorted(out)

    def arrows_at(self, t, same_part=None) -> list:
        """Pairs (i, j) with i <_t j of maximal decay for q_i - q_j, with their level."""
        out = []
        for i in self.labels:
            for j in self.labels:
                if i == j or (same_part is not None and not same_part(i, j)):
                    continue
                ld = self.lead(i, j)
                if ld is None:
                    continue
                kappa, psi = ld
                if _norm2(psi - kappa * t) == 1:
                    out.append((i, j, kappa))
        return out

    def levels(self) -> list:
        return sorted({self.lead(i, j)[0] for i, j in self.pairs()})


class OscillatoryError(ValueError):
    def __init__(self, i, j, t):
        super().__init__(f"{i} and {j} oscillate at angle {t}*pi; the direction is a Stokes direction")
        self.pair = (i, j)
        self.t = t


LESS = "Less"
GREATER = "Greater"
OSCILLATORY = "Oscillatory"


def _t(d) -> Fraction:
    return d.t if isinstance(d, Angle) else rat(d)


def dominance_compare(theta: IrregularClass, i: CoverPoint, j: CoverPoint, d) -> str:
    if i == j:
        raise ValueError("dominance_compare needs two distinct fiber points")
    s = Fiber.of_class(theta).compare(i, j, _t(d))
    return {-1: LESS, 1: GREATER, 0: OSCILLATORY}[s]


def stokes_directions(theta: IrregularClass) -> list[Angle]:
    return [Angle(t) for t in Fiber.of_class(theta).stokes_directions()]


def singular_directions(theta: IrregularClass) -> list[Angle]:
    return [Angle(t) for t in Fiber.of_class(theta).singular_directions()]


@dataclass(frozen=True)
class StokesArrow:
    direction: Angle
    source: CoverPoint
    target: CoverPoint
    level: Fraction


def stokes_arrows_at(theta: IrregularClass, d) -> list[StokesArrow]:
    """Arrows source -> target meaning target is subdominant to source at d."""
    t = _t(d)
    ang = Angle(t) if not isinstance(d, Angle) else d
    return [StokesArrow(ang, j, i, k) for i, j, k in Fiber.of_class(theta).arrows_at(t)]


def dominance_order_at(theta: IrregularClass, d) -> list[CoverPoint]:
    return Fiber.of_class(theta).order_at(_t(d))


def levels(theta: IrregularClass) -> list[Fraction]:
    """Distinct nonzero slopes of End(theta), i.e. of all pairwise differences."""
    return Fiber.of_class(theta).levels()


# ---------------------------------------------------------------- class algebra

def dual(theta: IrregularClass) -> IrregularClass:
    return IrregularClass((make_circle(-c.rep), m) for c, m in theta.entries)


def tensor(a: IrregularClass, b: IrregularClass) -> IrregularClass:
    counts: dict[Circle, int] = {}
    for c1, m1 in a.entries:
        for c2, m2 in b.entries:
            for s1 in range(c1.ram):
                f1 = c1.sheet(s1)
                for s2 in range(c2.ram):
                    c = make_circle(f1 + c2.sheet(s2))
                    counts[c] = counts.get(c, 0) + m1 * m2
    entries = []
    for c, n in counts.items():
        if n % c.ram:
            raise AssertionError("tensor product fiber count not divisible by ramification")
        entries.append((c, n // c.ram))
    entries.sort(key=lambda e: (e[0].slope, e[0].rep.sort_key()))
    return IrregularClass(entries)


def end(theta: IrregularClass) -> IrregularClass:
    return tensor(theta, dual(theta))


def hom(a: IrregularClass, b: IrregularClass) -> IrregularClass:
    return tensor(b, dual(a))


def class_algebra(op: str, a: IrregularClass, b: IrregularClass | None = None) -> IrregularClass:
    if op == "dual":
        return dual(a)
    if op == "end":
        return end(a)
    if op == "tensor":
        return tensor(a, b)
    if op == "hom":
        return hom(a, b)
    raise ValueError(f"unknown class operation {op!r}")


# ------------------------------------------------------- quotients and fission

@dataclass(frozen=True)
class Quotient:
    source: IrregularClass
    target: IrregularClass
    level: Fraction
    projection: dict  # CoverPoint of source -> CoverPoint of target


def natural_quotient(theta: IrregularClass, k) -> Quotient:
    """Identify fiber points whose difference has slope <= k."""
    k = rat(k)
    if k <= 0:
        raise ValueError("k must be positive")
    pts = fiber(theta)
    trunc = {p: theta.entries[p.circle][0].sheet(p.sheet).truncate(k) for p in pts}
    circles: list[Circle] = []
    for p in pts:
        c = make_circle(trunc[p])
        if c not in circles:
            circles.append(c)
    circles.sort(key=lambda c: (c.slope, c.rep.sort_key()))
    proj = {}
    mult = {c: 0 for c in circles}
    for p in pts:
        c = make_circle(trunc[p])
        ci = circles.index(c)
        s = sheet_of(c, trunc[p])
        proj[p] = CoverPoint(ci, s)
        if s == 0:
            mult[c] += theta.entries[p.circle][1]
    target = IrregularClass((c, mult[c]) for c in circles)
    # re-index projection by the target's entry order
    order = {c: target.index_of(c) for c in circles}
    proj = {p: CoverPoint(order[circles[q.circle]], q.sheet) for p, q in proj.items()}
    return Quotient(theta, target, k, proj)


@dataclass(frozen=True)
class FissionTree:
    levels: tuple
    stages: tuple  # IrregularClass per stage, stages[0] = the class itself
    maps: tuple    # projection dicts stage i -> stage i+1

    @property
    def degrees(self) -> list[int]:
        return [len(fiber(s)) for s in self.stages]


def fission_tree(theta: IrregularClass) -> FissionTree:
    lv = levels(theta)
    stages = [theta]
    maps = []
    current = theta
    for k in lv:
        q = natural_quotient(current, k)
        maps.append(q.projection)
        stages.append(q.target)
        current = q.target
    return FissionTree(tuple(lv), tuple(stages), tuple(maps))
