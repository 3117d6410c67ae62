"""Deterministic generators of classes and valid Stokes structures.

All randomness flows through an explicit random.Random instance.  Generated
graded structures are valid by construction: gradings are images of a fixed
standard grading under products of Stokes-group elements, and the boundary
monodromy is closed off either by a handle pair (genus 1, exact commutator
solver) or, in genus 0, by solving the relation in closed form.
"""
from __future__ import annotations

import random
from fractions import Fraction

from . import matrix as mx
from .exact import GaussianRational
from .flagged import Filtration, Grading, QuiverOrder, Subspace, span
from .irregular import ExponentialFactor, Fiber, IrregularClass, OscillatoryError
from .structures import (
    BoundaryPresentation,
    StokesFilteredLS,
    StokesGradedLS,
    choose_basepoint,
    grading_to_filtration,
    surface_product,
)

G = GaussianRational
SMALL = (-1, 0, 0, 1)


def small_gaussian(rnd: random.Random, nonzero: bool = False) -> GaussianRational:
    while True:
        z = G(rnd.choice(SMALL), rnd.choice(SMALL) if rnd.random() < 0.3 else 0)
        if z or not nonzero:
            return z


def random_matrix(rnd, n, m=None):
    m = n if m is None else m
    return [[small_gaussian(rnd) for _ in range(m)] for _ in range(n)]


def random_invertible(rnd, n):
    while True:
        a = random_matrix(rnd, n)
        for i in range(n):
            a[i][i] = a[i][i] + rnd.choice((1, 2))
        if mx.det(a):
            return a


# ------------------------------------------------------------------- classes

def weber_class() -> IrregularClass:
    q = ExponentialFactor.of((2, Fraction(1, 4), 0))
    return IrregularClass.of((q, 1), (-q, 1))


def _random_factor(rnd, ram, max_slope):
    ks = [Fraction(a, ram) for a in range(1, int(max_slope * ram) + 1)]
    if ram > 1:
        # the leading exponent must carry the full ramification
        lead_choices = [k for k in ks if k.denominator == ram]
    else:
        lead_choices = ks
    lead = rnd.choice(lead_choices)
    terms = [(lead, 1, Fraction(rnd.randrange(8), 4))]
    lower = [k for k in ks if k < lead]
    if lower and rnd.random() < 0.4:
        terms.append((rnd.choice(lower), 1, Fraction(rnd.randrange(8), 4)))
    return ExponentialFactor.of(*terms)


def random_class(rnd, rank_max=6, levels_max=2, ram_max=3, max_singular=16, max_slope=2,
                 allow_tame=True, min_levels=1) -> IrregularClass:
    """A random irregular class.  All coefficients have modulus 1."""
    while True:
        budget = rnd.randint(2, rank_max)
        entries = []
        used = 0
        while used < budget:
            ram = rnd.randint(1, min(ram_max, budget - used))
            if allow_tame and ram == 1 and rnd.random() < 0.2:
                q = ExponentialFactor()
            else:
                q = _random_factor(rnd, ram, max_slope)
            mult = 1 if rnd.random() < 0.8 or used + 2 * ram > budget else 2
            entries.append((q, mult))
            used += ram * mult
        try:
            theta = IrregularClass(entries)
            fib = Fiber.of_class(theta)
            lv = fib.levels()
            if not min_levels <= len(lv) <= levels_max:
                continue
            if len(fib.singular_directions()) > max_singular:
                continue
        except (ValueError, OscillatoryError):
            continue
        return theta


# ---------------------------------------------------------- graded structures

def standard_grading(fib: Fiber) -> Grading:
    n = fib.rank
    pieces, pos = {}, 0
    for i in fib.labels:
        d = fib.mults[i]
        pieces[i] = Subspace.coordinate(n, range(pos, pos + d))
        pos += d
    return Grading(n, pieces, fib.labels, check=False)


def _slices(fib):
    out, pos = {}, 0
    for i in fib.labels:
        out[i] = range(pos, pos + fib.mults[i])
        pos += fib.mults[i]
    return out


def random_stokes_element(rnd, fib: Fiber, order: QuiverOrder, density=0.7):
    """Random element of Sto(std, order): identity plus blocks (i, j) for i < j."""
    n = fib.rank
    sl = _slices(fib)
    u = mx.identity(n)
    for i, j in order.closure:
        for r in sl[i]:
            for c in sl[j]:
                if rnd.random() < density:
                    u[r][c] = small_gaussian(rnd)
    return u


def random_twist(rnd, fib: Fiber):
    """Graded map sending block shift(i) to block i, with determinant 1."""
    n = fib.rank
    sl = _slices(fib)
    t = mx.zeros(n)
    for i in fib.labels:
        src = sl[fib.shift[i]]
        blk = random_invertible(rnd, len(src))
        for a, r in enumerate(sl[i]):
            for b, c in enumerate(src):
                t[r][c] = blk[a][b]
    d = mx.det(t)
    col = 0
    for r in range(n):
        t[r][col] = t[r][col] / d
    return t


def _lu(m):
    n = len(m)
    u = mx.copy(m)
    low = mx.identity(n)
    for c in range(n):
        if not u[c][c]:
            return None
        for r in range(c + 1, n):
            f = u[r][c] / u[c][c]
            if f:
                low[r][c] = f
                u[r] = [x - f * y for x, y in zip(u[r], u[c])]
    return low, u


def _eigvecs(t, values):
    n = len(t)
    cols = []
    for lam in values:
        ns = mx.nullspace(mx.sub(t, mx.scale(mx.identity(n), lam)), n)
        if len(ns) != 1:
            return None
        cols.append(ns[0])
    return mx.transpose(cols)


def solve_commutator(m, rnd, tries=200):
    """(A, B) with A B A^-1 B^-1 = m, for m of determinant 1 and not a nontrivial scalar."""
    n = len(m)
    if mx.det(m) != 1:
        raise ValueError("a commutator has determinant 1")
    if mx.is_identity(m):
        a = random_invertible(rnd, n)
        return a, mx.mul(a, a)
    for _ in range(tries):
        c = random_invertible(rnd, n)
        ci = mx.inverse(c)
        mc = mx.mul_many(c, m, ci)
        lu = _lu(mc)
        if lu is None:
            continue
        low, up = lu
        xs = [G(1)]
        for i in range(n - 1):
            xs.append(xs[-1] / up[i][i])
        if len(set(xs)) < n:
            continue
        x = [[xs[i] if i == j else G(0) for j in range(n)] for i in range(n)]
        b = mx.mul(mx.inverse(up), x)
        mb = mx.mul(low, x)
        eb, emb = _eigvecs(b, xs), _eigvecs(mb, xs)
        if eb is None or emb is None:
            continue
        a = mx.mul(emb, mx.inverse(eb))
        a, b = mx.mul_many(ci, a, c), mx.mul_many(ci, b, c)
        if mx.equal(surface_product([(a, b)], n), m):
            return a, b
    raise ValueError("no commutator presentation found")


def random_graded(rnd, theta: IrregularClass | None = None, genus: int = 1, trivial_stokes=False,
                  **class_kw) -> StokesGradedLS:
    """A valid Stokes graded local system built from random Stokes data."""
    if genus not in (0, 1):
        raise ValueError("the generator supports genus 0 and 1")
    if theta is None:
        theta = random_class(rnd, **class_kw)
    fib = Fiber.of_class(theta)
    n = fib.rank
    beta = choose_basepoint(fib)
    probe = BoundaryPresentation(theta, beta).frame()
    std = standard_grading(fib)
    p = random_invertible(rnd, n)
    if genus == 0:
        steps, twist = _genus0_data(rnd, fib, probe, trivial_stokes)
    else:
        steps = [mx.identity(n) if trivial_stokes else random_stokes_element(rnd, fib, probe.arrows(a))
                 for a in probe.singular]
        twist = random_twist(rnd, fib)
    acc = p
    grads = [std.image(p)]
    for s in steps:
        acc = mx.mul(acc, s)
        grads.append(std.image(acc))
    m = mx.mul_many(acc, twist, mx.inverse(p))   # inverse of the boundary monodromy
    rho = mx.inverse(m)
    if not probe.singular:
        grads = grads[:1]
    else:
        grads = grads[:-1]
    if genus == 0:
        if not mx.is_identity(rho):
            raise AssertionError("genus-0 data does not close up")
        handles = []
    else:
        for _ in range(20):
            try:
                handles = [solve_commutator(m, rnd)]
                break
            except ValueError:
                twist = random_twist(rnd, fib)
                m = mx.mul_many(acc, twist, mx.inverse(p))
                rho = mx.inverse(m)
        else:
            raise ValueError("could not close the surface relation")
    b = BoundaryPresentation(theta, beta, rho, handles)
    return StokesGradedLS(b, grads)


def _genus0_data(rnd, fib: Fiber, frame, trivial):
    """Stokes factors s_1..s_r and twist with s_1 ... s_r * twist = 1."""
    n = fib.rank
    r = len(frame.singular)
    if trivial or r == 0:
        if any(fib.shift[i] != i for i in fib.labels):
            raise ValueError("genus 0 with trivial Stokes data needs an unramified class")
        return [mx.identity(n)] * r, mx.identity(n)
    if n != 2 or len(fib.labels) != 2 or r % 2:
        raise ValueError("nontrivial genus-0 data is generated for rank-2 one-level two-circle classes")
    steps = []
    for a in frame.singular[:-2]:
        steps.append(random_stokes_element(rnd, fib, frame.arrows(a), density=1.0))
    x = mx.mul_many(*steps) if steps else mx.identity(2)
    # solve x * s_{r-1} * s_r diagonal with s_{r-1}, s_r in the last two Stokes groups
    last = [frame.arrows(a) for a in frame.singular[-2:]]
    upper = (fib.labels[0], fib.labels[1]) in last[0].closure
    if not upper:
        w = [[G(0), G(1)], [G(1), G(0)]]
        x = mx.mul_many(w, x, w)
    p_, q_, r_ = x[0][0], x[0][1], x[1][0]
    if not p_:
        return _genus0_data(rnd, fib, frame, trivial)
    c = -q_ / p_
    d = -r_ * p_
    s1 = [[G(1), c], [G(0), G(1)]]
    s2 = [[G(1), G(0)], [d, G(1)]]
    if not upper:
        s1, s2 = mx.mul_many(w, s1, w), mx.mul_many(w, s2, w)
        x = mx.mul_many(w, x, w)
    steps += [s1, s2]
    total = mx.mul_many(*steps)
    return steps, mx.inverse(total)


def random_filtered(rnd, **kw) -> StokesFilteredLS:
    return grading_to_filtration(random_graded(rnd, **kw))


# ------------------------------------------------------------------- Weber

def weber_filtered(lines, monodromy=None) -> StokesFilteredLS:
    """Weber-type filtered system: component c has subdominant line lines[c]."""
    b = BoundaryPresentation(weber_class(), None, monodromy)
    fr = b.frame()
    out = []
    for c, t in enumerate(fr.f_samples()):
        order = fr.fib.order_at(t)
        out.append(Filtration(2, order, {order[0]: span([lines[c]]), order[1]: Subspace.full(2)}))
    return StokesFilteredLS(b, out)


def random_weber_lines(rnd):
    while True:
        lines = [[small_gaussian(rnd), small_gaussian(rnd)] for _ in range(4)]
        if any(not any(v) for v in lines):
            continue
        spans = [span([v]) for v in lines]
        if all(spans[c] != spans[(c + 1) % 4] for c in range(4)):
            return lines
