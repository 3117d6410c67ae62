"""Stokes filtered, Stokes graded and Stokes local systems at one marked point.

Cut convention.  A structure is stored in the fibre V_b over a basepoint b
that avoids every Stokes and singular direction.  Data over a direction t in
[b, b + 2) (units of pi) is carried to V_b along the positive path, and cover
labels are continued along the same path.  One more positive turn acts by

    X_{t+2}(i) = inv(rho) X_t(shift(i)),

where rho is the monodromy of the positive loop at b and `shift` is the cover
monodromy.  The surface relation is prod [A_g, B_g] * rho = 1 with
[A, B] = A B A^-1 B^-1.

Filtrations are listed per component of the circle minus the Stokes
directions, gradings per component of the circle minus the singular
directions.  Component 0 is the one containing b; the others follow in
positive order.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from math import floor

from . import matrix as mx
from .exact import Angle, parse_rat, rat_str
from .flagged import (
    Filtration,
    GradedQuotients,
    Grading,
    NoCommonSplitting,
    QuiverOrder,
    Subspace,
    _project,
    assoc_filtration,
    check_grading_pair,
    common_splitting,
    intersect,
    median_grading,
    splits,
    stokes_group_membership,
    sum_all,
    wild_monodromy,
)
from .irregular import (
    CoverPoint,
    ExponentialFactor,
    Fiber,
    IrregularClass,
    class_algebra,
    lead_difference,
)
from .exact import cos_sign

SCHEMA_VERSION = 1


class InvalidStructure(ValueError):
    """Raised when an operation needs a valid structure and gets an invalid one."""


# ------------------------------------------------------------ periodic helpers

def _periodic_next(points, t):
    """Smallest p + 2w > t over p in points (points are taken mod 2)."""
    best = None
    for p in points:
        c = p + 2 * (floor((t - p) / 2) + 1)
        if best is None or c < best:
            best = c
    return best


def _periodic_prev(points, t):
    """Largest p + 2w < t."""
    best = None
    for p in points:
        c = p - 2 * (floor((p - t) / 2) + 1)
        if best is None or c > best:
            best = c
    return best


def _on(points, t) -> bool:
    return any((t - p) % 2 == 0 for p in points)


def _nudge(t, crit):
    """t itself if it avoids crit, else the midpoint to the next point of crit."""
    if not crit or not _on(crit, t):
        return t
    return (t + _periodic_next(crit, t)) / 2


def _commutator(a, b):
    return mx.mul_many(a, b, mx.inverse(a), mx.inverse(b))


def surface_product(handles, n):
    out = mx.identity(n)
    for a, b in handles:
        out = mx.mul(out, _commutator(a, b))
    return out


def choose_basepoint(fib: Fiber) -> Fraction:
    """0 when it is not a jump, else half of the first positive jump."""
    jumps = sorted(set(fib.stokes_directions(Fraction(0))) | set(fib.singular_directions(Fraction(0))))
    if not jumps or jumps[0] != 0:
        return Fraction(0)
    return jumps[1] / 2 if len(jumps) > 1 else Fraction(1)


# ---------------------------------------------------------------------- frame

class Frame:
    """Cover data, basepoint and monodromy: enough to move data around the circle."""

    def __init__(self, fib: Fiber, beta, rho, extra=()):
        self.fib = fib
        self.n = fib.rank
        self.beta = Fraction(beta)
        self.rho = rho
        self.rho_inv = mx.inverse(rho)
        lo = self.beta
        extra = {lo + (Fraction(e) - lo) % 2 for e in extra}
        self.real_stokes = fib.stokes_directions(lo)
        self.stokes = sorted(set(self.real_stokes) | extra)
        self.singular = fib.singular_directions(lo)
        if lo in self.stokes or lo in self.singular:
            raise ValueError(f"basepoint {lo}*pi lies on a jump direction")
        self.critical = sorted(set(self.stokes) | set(self.singular))

    def reduce(self, t):
        w = floor((t - self.beta) / 2)
        return t - 2 * w, w

    def _samples(self, jumps):
        out = [self.beta]
        for s in jumps[:-1]:
            out.append((s + _periodic_next(self.critical, s)) / 2)
        return out

    def f_samples(self) -> list:
        """One point in each component of the circle minus the Stokes directions."""
        return self._samples(self.stokes)

    def g_samples(self) -> list:
        return self._samples(self.singular)

    @staticmethod
    def _index(jumps, t0):
        c = bisect_right(jumps, t0)
        if jumps and c == len(jumps):
            return 0, 1
        return c, 0

    def f_index(self, t):
        t0, w = self.reduce(t)
        if self.stokes and _on(self.stokes, t0):
            raise ValueError(f"{t}*pi is a Stokes direction")
        c, dw = self._index(self.stokes, t0)
        return c, w + dw

    def g_index(self, t):
        t0, w = self.reduce(t)
        if self.singular and _on(self.singular, t0):
            raise ValueError(f"{t}*pi is a singular direction")
        c, dw = self._index(self.singular, t0)
        return c, w + dw

    def sigma(self, i, w=1):
        for _ in range(abs(w)):
            i = self.fib.shift[i] if w > 0 else self.fib.inv_shift[i]
        return i

    def move_pieces(self, pieces: dict, w: int, m=None, m_inv=None) -> dict:
        """Pieces at t -> pieces at t + 2w (labels continued, monodromy applied)."""
        m = self.rho_inv if m is None else m
        m_inv = self.rho if m_inv is None else m_inv
        for _ in range(abs(w)):
            if w > 0:
                pieces = {i: pieces[self.fib.shift[i]].image(m) for i in pieces}
            else:
                pieces = {i: pieces[self.fib.inv_shift[i]].image(m_inv) for i in pieces}
        return pieces

    def move_grading(self, g: Grading, w: int) -> Grading:
        if not w:
            return g
        return Grading(g.n, self.move_pieces(g.pieces, w), g.labels, check=False)

    def move_filtration(self, f: Filtration, w: int) -> Filtration:
        if not w:
            return f
        order = list(f.order)
        for _ in range(abs(w)):
            order = [self.sigma(x, -1 if w > 0 else 1) for x in order]
        return Filtration(f.n, order, self.move_pieces(f.steps, w), check=False)

    def arrows(self, t) -> QuiverOrder:
        return QuiverOrder(self.fib.labels, [(i, j) for i, j, _ in self.fib.arrows_at(t)])


# ----------------------------------------------------------------- boundary

class BoundaryPresentation:
    """Class, basepoint, boundary monodromy and interior handle generators."""

    def __init__(self, theta: IrregularClass, basepoint=None, monodromy=None, handles=(), extra_jumps=()):
        self.theta = theta
        self.fib = Fiber.of_class(theta)
        self.n = theta.rank
        self.basepoint = choose_basepoint(self.fib) if basepoint is None else Fraction(basepoint)
        self.monodromy = mx.identity(self.n) if monodromy is None else monodromy
        self.handles = [(a, b) for a, b in handles]
        self.extra_jumps = tuple(Fraction(e) for e in extra_jumps)
        self._frame = None

    @property
    def genus(self) -> int:
        return len(self.handles)

    def frame(self) -> Frame:
        if self._frame is None:
            self._frame = Frame(self.fib, self.basepoint, self.monodromy, self.extra_jumps)
        return self._frame

    def relation_holds(self) -> bool:
        return mx.is_identity(mx.mul(surface_product(self.handles, self.n), self.monodromy))

    def with_(self, **kw) -> BoundaryPresentation:
        args = dict(theta=self.theta, basepoint=self.basepoint, monodromy=self.monodromy,
                    handles=self.handles, extra_jumps=self.extra_jumps)
        args.update(kw)
        return BoundaryPresentation(**args)

    def transform(self, p) -> BoundaryPresentation:
        """Change coordinates of V_b by the invertible p (v -> p v)."""
        pi = mx.inverse(p)
        conj = lambda m: mx.mul_many(p, m, pi)
        return self.with_(monodromy=conj(self.monodromy),
                          handles=[(conj(a), conj(b)) for a, b in self.handles])

    def to_json(self) -> dict:
        return {
            "class": self.theta.to_json(),
            "basepoint": {"pi_multiple": rat_str(self.basepoint)},
            "monodromy": mx.to_json(self.monodromy),
            "handles": [{"A": mx.to_json(a), "B": mx.to_json(b)} for a, b in self.handles],
            "extra_jumps": [{"pi_multiple": rat_str(e)} for e in self.extra_jumps],
        }

    @classmethod
    def from_json(cls, d) -> BoundaryPresentation:
        theta = IrregularClass.from_json(d["class"])
        return cls(theta,
                   parse_rat(d["basepoint"]["pi_multiple"]) if "basepoint" in d else None,
                   mx.from_json(d["monodromy"]) if "monodromy" in d else None,
                   [(mx.from_json(h["A"]), mx.from_json(h["B"])) for h in d.get("handles", [])],
                   [parse_rat(e["pi_multiple"]) for e in d.get("extra_jumps", [])])


def label_to_json(p: CoverPoint) -> list:
    return [p.circle, p.sheet]


def label_from_json(x) -> CoverPoint:
    return CoverPoint(int(x[0]), int(x[1]))


def grading_to_json(g: Grading) -> list:
    return [{"index": label_to_json(i), "basis": g.pieces[i].to_json()} for i in g.labels]


def grading_from_json(n, data) -> Grading:
    pieces = {label_from_json(e["index"]): Subspace.from_json(n, e["basis"]) for e in data}
    return Grading(n, pieces, [label_from_json(e["index"]) for e in data])


def filtration_to_json(f: Filtration) -> dict:
    return {"order": [label_to_json(i) for i in f.order],
            "steps": [{"index": label_to_json(i), "basis": f.steps[i].to_json()} for i in f.order]}


def filtration_from_json(n, data) -> Filtration:
    order = [label_from_json(x) for x in data["order"]]
    steps = {label_from_json(e["index"]): Subspace.from_json(n, e["basis"]) for e in data["steps"]}
    return Filtration(n, order, steps)


# ------------------------------------------------------------------ reports

@dataclass
class Check:
    direction: Fraction
    kind: str
    ok: bool
    detail: str = ""
    certificate: object = None

    def to_json(self) -> dict:
        out = {"direction": {"pi_multiple": rat_str(self.direction)}, "kind": self.kind, "ok": self.ok}
        if self.detail:
            out["detail"] = self.detail
        if self.certificate is not None:
            out["certificate"] = repr(self.certificate)
        return out


@dataclass
class Report:
    kind: str
    structural: list = field(default_factory=list)
    checks: list = field(default_factory=list)

    @property
    def structurally_ok(self) -> bool:
        return not self.structural

    @property
    def ok(self) -> bool:
        return not self.structural and all(c.ok for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def to_json(self) -> dict:
        return {"kind": self.kind, "ok": self.ok, "structural": list(self.structural),
                "checks": [c.to_json() for c in self.checks]}


# -------------------------------------------------------------- structures

class StokesFilteredLS:
    def __init__(self, boundary: BoundaryPresentation, filtrations):
        self.boundary = boundary
        self.filtrations = list(filtrations)

    kind = "filtered"

    @property
    def n(self):
        return self.boundary.n

    def filtration_at(self, t) -> Filtration:
        fr = self.boundary.frame()
        c, w = fr.f_index(Fraction(t))
        return fr.move_filtration(self.filtrations[c], w)

    def transform(self, p) -> StokesFilteredLS:
        return StokesFilteredLS(self.boundary.transform(p), [f.image(p) for f in self.filtrations])

    def __eq__(self, other):
        return (isinstance(other, StokesFilteredLS) and self.boundary.theta == other.boundary.theta
                and self.filtrations == other.filtrations)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "version": SCHEMA_VERSION}
        out.update(self.boundary.to_json())
        out["filtrations"] = [filtration_to_json(f) for f in self.filtrations]
        return out

    @classmethod
    def from_json(cls, d) -> StokesFilteredLS:
        b = BoundaryPresentation.from_json(d)
        return cls(b, [filtration_from_json(b.n, f) for f in d["filtrations"]])


class StokesGradedLS:
    def __init__(self, boundary: BoundaryPresentation, gradings):
        self.boundary = boundary
        self.gradings = list(gradings)

    kind = "graded"

    @property
    def n(self):
        return self.boundary.n

    def grading_at(self, t) -> Grading:
        fr = self.boundary.frame()
        c, w = fr.g_index(Fraction(t))
        return fr.move_grading(self.gradings[c], w)

    def extended(self) -> list:
        """Gradings 0..r with the last one the continuation of grading 0."""
        fr = self.boundary.frame()
        return self.gradings + [fr.move_grading(self.gradings[0], 1)]

    def transform(self, p) -> StokesGradedLS:
        return StokesGradedLS(self.boundary.transform(p), [g.image(p) for g in self.gradings])

    def __eq__(self, other):
        return (isinstance(other, StokesGradedLS) and self.boundary.theta == other.boundary.theta
                and self.gradings == other.gradings)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "version": SCHEMA_VERSION}
        out.update(self.boundary.to_json())
        out["gradings"] = [grading_to_json(g) for g in self.gradings]
        return out

    @classmethod
    def from_json(cls, d) -> StokesGradedLS:
        b = BoundaryPresentation.from_json(d)
        return cls(b, [grading_from_json(b.n, g) for g in d["gradings"]])


class StokesLocalSystem:
    """Grading of V_b, formal monodromy h and Stokes automorphisms, all at b.

    stokes[t] is the automorphism at the t-th singular direction after b,
    transported to b, normalised so that prod [A, B] * h * S_r ... S_1 = 1.
    medians[t] is the median grading at that direction (in V_b).
    """

    kind = "stokes-ls"

    def __init__(self, boundary: BoundaryPresentation, grading0: Grading, formal_monodromy, stokes, medians=()):
        self.boundary = boundary
        self.grading0 = grading0
        self.formal_monodromy = formal_monodromy
        self.stokes = list(stokes)
        self.medians = list(medians)

    @property
    def n(self):
        return self.boundary.n

    def to_json(self) -> dict:
        out = {"kind": self.kind, "version": SCHEMA_VERSION}
        out.update(self.boundary.to_json())
        out["grading0"] = grading_to_json(self.grading0)
        out["formal_monodromy"] = mx.to_json(self.formal_monodromy)
        out["stokes"] = [mx.to_json(s) for s in self.stokes]
        out["medians"] = [grading_to_json(g) for g in self.medians]
        return out

    @classmethod
    def from_json(cls, d) -> StokesLocalSystem:
        b = BoundaryPresentation.from_json(d)
        return cls(b, grading_from_json(b.n, d["grading0"]), mx.from_json(d["formal_monodromy"]),
                   [mx.from_json(s) for s in d["stokes"]],
                   [grading_from_json(b.n, g) for g in d.get("medians", [])])


# --------------------------------------------------------------- validation

def _structural_common(b: BoundaryPresentation, items, expected, rep: Report):
    if len(items) != expected:
        rep.structural.append(f"expected {expected} pieces of data, got {len(items)}")
        return False
    if not b.relation_holds():
        rep.structural.append("surface relation prod [A, B] * monodromy = 1 fails")
    try:
        mx.inverse(b.monodromy)
    except ZeroDivisionError:
        rep.structural.append("monodromy is singular")
        return False
    return True


def validate_filtered(s: StokesFilteredLS) -> Report:
    rep = Report("filtered")
    b = s.boundary
    try:
        fr = b.frame()
    except (ValueError, ZeroDivisionError) as e:
        rep.structural.append(str(e))
        return rep
    samples = fr.f_samples()
    if not _structural_common(b, s.filtrations, len(samples), rep):
        return rep
    labels = set(fr.fib.labels)
    for c, (f, t) in enumerate(zip(s.filtrations, samples)):
        if f.n != b.n or set(f.order) != labels:
            rep.structural.append(f"filtration {c} is not indexed by the fiber")
            continue
        if list(f.order) != fr.fib.order_at(t):
            rep.structural.append(f"filtration {c} is not ordered by dominance at {t}*pi")
        if f.dims() != fr.fib.mults:
            rep.structural.append(f"filtration {c} has the wrong dimension vector")
    if rep.structural:
        return rep
    m = len(fr.stokes)
    if m == 0:
        same = fr.move_filtration(s.filtrations[0], 1).steps == s.filtrations[0].steps
        rep.checks.append(Check(fr.beta + 2, "monodromy", same,
                                "" if same else "filtration is not preserved by the monodromy"))
        return rep
    for j, d in enumerate(fr.stokes, start=1):
        left = s.filtrations[j - 1]
        right = s.filtrations[j] if j < m else fr.move_filtration(s.filtrations[0], 1)
        try:
            common_splitting(left, right)
            rep.checks.append(Check(d, "SF2", True))
        except NoCommonSplitting as e:
            rep.checks.append(Check(d, "SF2", False, str(e), e.certificate))
    return rep


def validate_graded(s: StokesGradedLS) -> Report:
    rep = Report("graded")
    b = s.boundary
    if b.extra_jumps:
        rep.structural.append("graded structures carry no extra jump directions")
        return rep
    try:
        fr = b.frame()
    except (ValueError, ZeroDivisionError) as e:
        rep.structural.append(str(e))
        return rep
    if not _structural_common(b, s.gradings, len(fr.g_samples()), rep):
        return rep
    for c, g in enumerate(s.gradings):
        if g.n != b.n or set(g.labels) != set(fr.fib.labels):
            rep.structural.append(f"grading {c} is not indexed by the fiber")
        elif g.dims() != fr.fib.mults:
            rep.structural.append(f"grading {c} has the wrong dimension vector")
    if rep.structural:
        return rep
    ext = s.extended()
    if not fr.singular:
        same = ext[1] == ext[0]
        rep.checks.append(Check(fr.beta + 2, "monodromy", same,
                                "" if same else "grading is not preserved by the monodromy"))
        return rep
    for t, a in enumerate(fr.singular, start=1):
        ok, _ = check_grading_pair(ext[t - 1], ext[t], fr.arrows(a))
        rep.checks.append(Check(a, "SG2", ok, "" if ok else "wild monodromy is not in the Stokes group"))
    return rep


def validate(s) -> Report:
    if isinstance(s, StokesFilteredLS):
        return validate_filtered(s)
    if isinstance(s, StokesGradedLS):
        return validate_graded(s)
    if isinstance(s, StokesLocalSystem):
        return validate_stokes_ls(s)
    raise TypeError(f"cannot validate {type(s).__name__}")


def _require_valid(s):
    rep = validate(s)
    if not rep.ok:
        bad = rep.structural or [f"{c.kind} at {c.direction}*pi: {c.detail}" for c in rep.failures()]
        raise InvalidStructure("; ".join(bad))


# ----------------------------------------------------------- the functor phi

def grading_to_filtration(s: StokesGradedLS, check: bool = True) -> StokesFilteredLS:
    """Associated filtrations of the governing gradings, one per Stokes component."""
    b = s.boundary
    fr = b.frame()
    out = []
    for t in fr.f_samples():
        order = fr.fib.order_at(t)
        out.append(assoc_filtration(s.grading_at(t), order))
    if check:
        # across a singular direction both adjacent gradings give the same filtration
        for a in fr.singular:
            if a in fr.stokes:
                continue
            order = fr.fib.order_at(a)
            left = s.grading_at(_periodic_prev(fr.critical, a) / 2 + a / 2)
            right = s.grading_at((a + _periodic_next(fr.critical, a)) / 2)
            if assoc_filtration(left, order).steps != assoc_filtration(right, order).steps:
                raise InvalidStructure(f"gradings on either side of {a}*pi induce different filtrations")
    return StokesFilteredLS(b, out)


# ------------------------------------------------- intermediate filtrations

@dataclass
class IntermediateFiltration:
    direction: Fraction
    steps: dict       # label -> F_L(i) & F_R(i)
    relation: frozenset  # pairs (i, j): i below j on both sides

    def below(self, i) -> list:
        return [a for a, b in self.relation if b == i]


def _sides(s: StokesFilteredLS, d):
    fr = s.boundary.frame()
    d = Fraction(d)
    d0, w = fr.reduce(d)
    if d0 not in fr.stokes:
        raise ValueError(f"{d}*pi is not a Stokes direction")
    left = s.filtration_at(_periodic_prev(fr.stokes, d) / 2 + d / 2)
    right = s.filtration_at((d + _periodic_next(fr.stokes, d)) / 2)
    return left, right


def intermediate_filtration(s: StokesFilteredLS, d) -> IntermediateFiltration:
    left, right = _sides(s, d)
    steps = {i: intersect(left[i], right[i]) for i in left.order}
    pos_l = {i: k for k, i in enumerate(left.order)}
    pos_r = {i: k for k, i in enumerate(right.order)}
    rel = frozenset((i, j) for i in left.order for j in left.order
                    if pos_l[i] < pos_l[j] and pos_r[i] < pos_r[j])
    return IntermediateFiltration(Fraction(d), steps, rel)


# --------------------------------------------- associated graded local system

@dataclass
class AssociatedGraded:
    """Gr(V, F) at b: quotient data of filtration 0 and the formal monodromy.

    The monodromy acts on block coordinates (blocks in the order of
    filtration 0) and maps block i to block shift(i).
    """
    quotients: GradedQuotients
    monodromy: list
    shift: dict


def associated_graded_ls(s: StokesFilteredLS) -> AssociatedGraded:
    _require_valid(s)
    fr = s.boundary.frame()
    f0 = s.filtrations[0]
    gq = GradedQuotients(f0)
    m = len(fr.stokes)
    splittings = []
    for j in range(1, m + 1):
        left = s.filtrations[j - 1]
        right = s.filtrations[j] if j < m else fr.move_filtration(f0, 1)
        splittings.append((left, common_splitting(left, right)))
    n = s.n
    cols = [None] * n
    slices = gq.tautological_grading().block_slices(f0.order)
    blocks = {i: list(slices[i]) for i in f0.order}
    for i in f0.order:
        for idx, r in enumerate(gq.reps[i]):
            v = r
            for left, g in splittings:
                v = _project(v, g[i], left.below(i))
            v = mx.apply(fr.rho, v)
            target = fr.sigma(i)
            coords = gq.coords(target, [v])[0]
            col = [mx.gr(0)] * n
            for c, x in zip(blocks[target], coords):
                col[c] = x
            cols[blocks[i][idx]] = col
    return AssociatedGraded(gq, mx.transpose(cols), dict(fr.fib.shift))


# ------------------------------------------------------ canonical splitting

def _restrict_order(order, part):
    ps = set(part)
    return [i for i in order if i in ps]


def _split(frame: Frame, filt_at, debug_checks=True) -> list:
    """Gradings (one per component of the circle minus the singular directions)."""
    fib = frame.fib
    n = frame.n
    if len(fib.labels) == 1:
        (lab,) = fib.labels
        return [Grading(n, {lab: Subspace.full(n)}, [lab], check=False)]
    k = min(fib.levels())
    key = {i: fib.factors[i].truncate(k) for i in fib.labels}
    parts: dict = {}
    for i in fib.labels:
        parts.setdefault(key[i], []).append(i)
    same = lambda i, j: key[i] == key[j]
    crit = frame.critical

    if len(parts) == 1:
        g_mats = [mx.identity(n)]
        a_j = []
        w_m, w_m_inv = frame.rho_inv, frame.rho

        def x_base(t0):
            f = filt_at(t0)
            return dict(f.steps)
    else:
        fib_j = Fiber(list(parts), {p: p for p in parts},
                      {p: sum(fib.mults[i] for i in parts[p]) for p in parts},
                      {p: key[fib.shift[parts[p][0]]] for p in parts})
        frame_j = Frame(fib_j, frame.beta, frame.rho)

        def push_at(t):
            t = _nudge(t, frame.stokes)
            f = filt_at(t)
            order_j = fib_j.order_at(t)
            pos = {i: idx for idx, i in enumerate(f.order)}
            steps = {p: f[max(parts[p], key=pos.__getitem__)] for p in order_j}
            return Filtration(n, order_j, steps, check=False)

        grads_j = _split(frame_j, push_at, debug_checks)
        ext_j = grads_j + [frame_j.move_grading(grads_j[0], 1)]
        a_j = frame_j.singular
        g_mats = [mx.identity(n)]
        for t in range(1, len(ext_j)):
            g_mats.append(mx.mul(wild_monodromy(ext_j[t - 1], ext_j[t]), g_mats[-1]))
        g_r = g_mats[-1]
        w_m = mx.mul(mx.inverse(g_r), frame.rho_inv)
        w_m_inv = mx.inverse(w_m)
        g_invs = [mx.inverse(g) for g in g_mats]

        def x_base(t0):
            f = filt_at(t0)
            mj = bisect_right(a_j, t0)
            gam = ext_j[mj]
            order_j = fib_j.order_at(t0)
            out = {}
            lower = Subspace.zero(n)
            for p in order_j:
                piece = gam[p]
                for i in parts[p]:
                    out[i] = intersect(piece, f[i] + lower).image(g_invs[mj])
                lower = lower + piece
            return out

    x_cache = {}

    def x_at(t):
        """Per-part filtration steps at t, in W coordinates."""
        if t not in x_cache:
            t0, w = frame.reduce(t)
            x = x_base(t0)
            x_cache[t] = frame.move_pieces(x, w, w_m, w_m_inv)
        return x_cache[t]

    a_rel = fib.singular_directions(frame.beta, same_part=same)
    half = 1 / (2 * k)
    gk_cache = {}

    def gamma_k(d):
        if d in gk_cache:
            return gk_cache[d]
        lt, rt = _nudge(d - half, crit), _nudge(d + half, crit)
        xl, xr = x_at(lt), x_at(rt)
        pieces = {i: intersect(xl[i], xr[i]) for i in fib.labels}
        try:
            g = Grading(n, pieces, fib.labels)
        except ValueError:
            raise InvalidStructure(f"end filtrations of the supersector around {d}*pi are not opposite")
        if debug_checks:
            pts = [lt]
            p = lt
            while True:
                nxt = _periodic_next(crit, p)
                if nxt >= rt:
                    break
                p = (nxt + _periodic_next(crit, nxt)) / 2
                if p < rt:
                    pts.append(p)
            pts.append(rt)
            for p in pts:
                x = x_at(p)
                order = fib.order_at(p)
                for part in parts.values():
                    acc = Subspace.zero(n)
                    for i in _restrict_order(order, part):
                        acc = acc + pieces[i]
                        if acc != x[i]:
                            raise InvalidStructure(
                                f"splitting of the supersector around {d}*pi fails at {p}*pi")
        gk_cache[d] = g
        return g

    out = []
    for t in frame.g_samples():
        d = (_periodic_prev(a_rel, t) + _periodic_next(a_rel, t)) / 2
        gk = gamma_k(d)
        mj = bisect_right(a_j, t)
        out.append(gk.image(g_mats[mj]) if mj else gk)
    return out


def canonical_splitting(s: StokesFilteredLS, check: bool = True) -> StokesGradedLS:
    """The unique Stokes grading whose associated Stokes filtration is s."""
    if check:
        _require_valid(s)
    b = s.boundary
    grads = _split(b.frame(), s.filtration_at, debug_checks=check)
    out_b = b.with_(extra_jumps=()) if b.extra_jumps else b
    return StokesGradedLS(out_b, grads)


def one_level_splitting(s: StokesFilteredLS, d) -> Grading:
    """Grading of the singular sector containing d (a non-singular direction).

    Only for classes with a single level.  The grading is read off the two
    opposite filtrations at d -/+ pi/2k and checked on the whole supersector.
    """
    fr = s.boundary.frame()
    lv = fr.fib.levels()
    if len(lv) != 1:
        raise ValueError("one_level_splitting needs exactly one level")
    d = Fraction(d)
    if _on(fr.singular, d):
        raise ValueError(f"{d}*pi is a singular direction")
    sub = Frame(fr.fib, fr.beta, fr.rho)
    grads = _split(sub, s.filtration_at)
    c, w = sub.g_index(d)
    return sub.move_grading(grads[c], w)


# --------------------------------------------------- Stokes local systems

def _chain(s: StokesGradedLS):
    ext = s.extended()
    gs = [wild_monodromy(ext[t - 1], ext[t]) for t in range(1, len(ext))]
    big = [mx.identity(s.n)]
    for g in gs:
        big.append(mx.mul(g, big[-1]))
    return ext, gs, big


def graded_to_stokes_ls(s: StokesGradedLS, check: bool = True) -> StokesLocalSystem:
    if check:
        _require_valid(s)
    fr = s.boundary.frame()
    if not fr.singular:
        return StokesLocalSystem(s.boundary, s.gradings[0], fr.rho, [], [])
    ext, gs, big = _chain(s)
    stokes, medians = [], []
    for t, g in enumerate(gs, start=1):
        prev = big[t - 1]
        s_t = mx.mul_many(mx.inverse(prev), g, prev)
        stokes.append(mx.inverse(s_t))
        medians.append(median_grading(ext[t - 1], ext[t]))
    h = mx.mul(fr.rho, big[-1])
    return StokesLocalSystem(s.boundary, ext[0], h, stokes, medians)


def stokes_ls_to_graded(ls: StokesLocalSystem) -> StokesGradedLS:
    acc = mx.identity(ls.n)
    grads = [ls.grading0]
    for s_rep in ls.stokes[:-1]:
        acc = mx.mul(acc, mx.inverse(s_rep))
        grads.append(ls.grading0.image(acc))
    return StokesGradedLS(ls.boundary, grads)


def validate_stokes_ls(ls: StokesLocalSystem) -> Report:
    rep = Report("stokes-ls")
    b = ls.boundary
    try:
        fr = b.frame()
    except (ValueError, ZeroDivisionError) as e:
        rep.structural.append(str(e))
        return rep
    if len(ls.stokes) != len(fr.singular):
        rep.structural.append(f"expected {len(fr.singular)} Stokes automorphisms, got {len(ls.stokes)}")
        return rep
    g0 = ls.grading0
    if set(g0.labels) != set(fr.fib.labels) or g0.dims() != fr.fib.mults:
        rep.structural.append("grading is not indexed by the fiber with the class multiplicities")
        return rep
    h = ls.formal_monodromy
    twist = all(g0[i].image(h) == g0[fr.sigma(i)] for i in g0.labels)
    rep.checks.append(Check(fr.beta, "twist", twist, "" if twist else "h does not permute the graded pieces"))
    for a, s_rep in zip(fr.singular, ls.stokes):
        ok = stokes_group_membership(s_rep, g0, fr.arrows(a))
        rep.checks.append(Check(a, "Sto", ok, "" if ok else "automorphism is not in the Stokes group"))
    word = surface_product(b.handles, ls.n)
    word = mx.mul(word, h)
    for s_rep in reversed(ls.stokes):
        word = mx.mul(word, s_rep)
    ok = mx.is_identity(word)
    rep.checks.append(Check(fr.beta, "relation", ok, "" if ok else "prod [A, B] h S_r ... S_1 != 1"))
    rel = b.relation_holds()
    rep.checks.append(Check(fr.beta, "boundary", rel, "" if rel else "prod [A, B] * monodromy != 1"))
    if ls.medians:
        graded = stokes_ls_to_graded(ls)
        ext = graded.extended()
        okm = len(ls.medians) == len(fr.singular) and all(
            ls.medians[t] == median_grading(ext[t], ext[t + 1]) for t in range(len(fr.singular)))
        rep.checks.append(Check(fr.beta, "medians", okm, "" if okm else "stored medians disagree"))
    return rep


# ---------------------------------------------------------- moderate sections

def _fixed_space(b: BoundaryPresentation) -> Subspace:
    n = b.n
    rows = []
    mats = [b.monodromy] + [m for ab in b.handles for m in ab]
    for m in mats:
        rows.extend(mx.sub(m, mx.identity(n)))
    if not rows or mx.is_zero(rows):
        return Subspace.full(n)
    return Subspace(n, mx.nullspace(rows, n))


def _tame_labels(fib: Fiber) -> list:
    return [i for i in fib.labels if fib.factors[i].is_tame()]


def _zero_critical(fr: Frame) -> list:
    """Directions where some label changes its position relative to the tame circle."""
    zero = ExponentialFactor()
    out = set()
    for i in fr.fib.labels:
        ld = lead_difference(fr.fib.factors[i], zero)
        if ld is None:
            continue
        kappa, psi = ld
        for res in (Fraction(1, 2), Fraction(-1, 2)):
            c = psi - res
            t0 = c / kappa
            # all solutions t = (c - 2m)/kappa inside the window
            step = Fraction(2) / kappa
            t = t0 - step * floor((t0 - fr.beta) / step)
            while t < fr.beta + 2:
                out.add(t)
                t += step
    return sorted(out)


def _tame_step(fr: Frame, f: Filtration, t) -> Subspace:
    zero = ExponentialFactor()
    below = []
    for i in f.order:
        ld = lead_difference(fr.fib.factors[i], zero)
        if ld is None or cos_sign(ld[1] - ld[0] * t) < 0:
            below.append(f[i])
    return sum_all(f.n, below)


def moderate_sections(s) -> Subspace:
    """Global sections of V with moderate growth in every direction."""
    b = s.boundary
    fr = b.frame()
    space = _fixed_space(b)
    if isinstance(s, StokesFilteredLS):
        crit = sorted(set(fr.stokes) | set(_zero_critical(fr)))
        pts = [fr.beta] + [(c + _periodic_next(crit, c)) / 2 for c in crit]
        for t in pts:
            space = intersect(space, _tame_step(fr, s.filtration_at(t), t))
        return space
    tame = _tame_labels(fr.fib)
    if isinstance(s, StokesGradedLS):
        for g in s.gradings:
            piece = g[tame[0]] if tame else Subspace.zero(s.n)
            space = intersect(space, piece)
        return space
    if isinstance(s, StokesLocalSystem):
        piece = s.grading0[tame[0]] if tame else Subspace.zero(s.n)
        space = intersect(space, piece)
        rows = []
        for m in [s.formal_monodromy] + s.stokes:
            rows.extend(mx.sub(m, mx.identity(s.n)))
        if rows and not mx.is_zero(rows):
            space = intersect(space, Subspace(s.n, mx.nullspace(rows, s.n)))
        return space
    raise TypeError(f"no sections for {type(s).__name__}")


def tame_graded_sections(s: StokesFilteredLS) -> list:
    """Sections of the tame piece of Gr(V, F) on the circle, in block coordinates."""
    ag = associated_graded_ls(s)
    fr = s.boundary.frame()
    tame = _tame_labels(fr.fib)
    if not tame:
        return []
    slices = ag.quotients.tautological_grading().block_slices(s.filtrations[0].order)
    idx = list(slices[tame[0]])
    sub = [[ag.monodromy[r][c] - (1 if r == c else 0) for c in idx] for r in idx]
    return [[x for x in v] for v in mx.nullspace(sub, len(idx))] if sub else []


def section_to_graded(s: StokesFilteredLS, v) -> list:
    """Class of a moderate section in the tame block of Gr(V, F) at b."""
    fr = s.boundary.frame()
    (t,) = _tame_labels(fr.fib)
    return GradedQuotients(s.filtrations[0]).coords(t, [v])[0]


# --------------------------------------------------------- dual and tensor

def _kron_vec(u, v):
    return [a * b for a in u for b in v]


def _kron_space(a: Subspace, b: Subspace) -> Subspace:
    n = a.n * b.n
    if not a.dim or not b.dim:
        return Subspace.zero(n)
    return Subspace(n, [_kron_vec(u, v) for u in a.basis for v in b.basis])


def _kron(a, b):
    return [[x * y for x in ra for y in rb] for ra in a for rb in b]


def _inv_t(m):
    return mx.transpose(mx.inverse(m))


def _combined_basepoint(fibs, rho_n):
    lo = Fraction(0)
    pts = set()
    for f in fibs:
        pts |= set(f.stokes_directions(lo)) | set(f.singular_directions(lo))
    pts = sorted(pts)
    if not pts or pts[0] != 0:
        return Fraction(0)
    return pts[1] / 2 if len(pts) > 1 else Fraction(1)


def _match_labels(fib_new: Fiber, factor_of) -> dict:
    """new label -> source key whose factor equals the new label's factor."""
    out = {}
    for p in fib_new.labels:
        f = fib_new.factors[p]
        hits = [key for key, g in factor_of.items() if g == f]
        out[p] = hits
    return out


def _dual(s):
    b = s.boundary
    theta = class_algebra("dual", b.theta)
    fib_new = Fiber.of_class(theta)
    src = b.fib
    labels = _match_labels(fib_new, {i: -src.factors[i] for i in src.labels})
    lab = {p: hits[0] for p, hits in labels.items()}
    beta = _combined_basepoint([src, fib_new], b.n)
    nb = BoundaryPresentation(theta, beta, _inv_t(b.monodromy),
                              [(_inv_t(a), _inv_t(c)) for a, c in b.handles])
    fr = nb.frame()
    n = b.n
    if isinstance(s, StokesFilteredLS):
        out = []
        for t in fr.f_samples():
            f = s.filtration_at(t)
            order = fib_new.order_at(t)
            steps = {p: f.below(lab[p]).annihilator() for p in order}
            out.append(Filtration(n, order, steps, check=False))
        return StokesFilteredLS(nb, out)
    out = []
    for t in fr.g_samples():
        g = s.grading_at(t)
        pieces = {p: sum_all(n, (g[i] for i in g.labels if i != lab[p])).annihilator()
                  for p in fib_new.labels}
        out.append(Grading(n, pieces, fib_new.labels, check=False))
    return StokesGradedLS(nb, out)


def _tensor(s1, s2):
    b1, b2 = s1.boundary, s2.boundary
    if b1.genus != b2.genus:
        raise ValueError("structures live on surfaces of different genus")
    theta = class_algebra("tensor", b1.theta, b2.theta)
    fib_new = Fiber.of_class(theta)
    f1, f2 = b1.fib, b2.fib
    sums = {(i, j): f1.factors[i] + f2.factors[j] for i in f1.labels for j in f2.labels}
    beta = _combined_basepoint([f1, f2, fib_new], 0)
    nb = BoundaryPresentation(theta, beta, _kron(b1.monodromy, b2.monodromy),
                              [(_kron(a1, a2), _kron(c1, c2))
                               for (a1, c1), (a2, c2) in zip(b1.handles, b2.handles)])
    fr = nb.frame()
    n = b1.n * b2.n
    if isinstance(s1, StokesFilteredLS):
        out = []
        for t in fr.f_samples():
            fa, fb = s1.filtration_at(t), s2.filtration_at(t)
            order = fib_new.order_at(t)
            steps = {}
            for p in order:
                fp = fib_new.factors[p]
                spaces = []
                for (i, j), f in sums.items():
                    ld = lead_difference(f, fp)
                    if ld is None or cos_sign(ld[1] - ld[0] * t) < 0:
                        spaces.append(_kron_space(fa[i], fb[j]))
                steps[p] = sum_all(n, spaces)
            out.append(Filtration(n, order, steps, check=False))
        return StokesFilteredLS(nb, out)
    out = []
    for t in fr.g_samples():
        ga, gb = s1.grading_at(t), s2.grading_at(t)
        pieces = {}
        for p in fib_new.labels:
            fp = fib_new.factors[p]
            pieces[p] = sum_all(n, (_kron_space(ga[i], gb[j]) for (i, j), f in sums.items() if f == fp))
        out.append(Grading(n, pieces, fib_new.labels, check=False))
    return StokesGradedLS(nb, out)


def dual_and_tensor(op: str, s1, s2=None):
    if op == "dual":
        return _dual(s1)
    if op == "tensor":
        return _tensor(s1, s2)
    if op == "hom":
        return _tensor(_dual(s1), s2)
    raise ValueError(f"unknown operation {op!r}")


def identity_section(n: int) -> list:
    """The identity of V as a vector of V^dual (x) V."""
    return [mx.gr(1) if a == b else mx.gr(0) for a in range(n) for b in range(n)]


# ---------------------------------------------------- level decomposition

def level_factorization(u, grading: Grading, fib: Fiber, k):
    """Write u = a b with a block diagonal for the parts of I(k), b the rest.

    Returns (a, b).  a keeps the blocks of u between labels with the same
    truncation above k, b = a^-1 u.
    """
    key = {i: fib.factors[i].truncate(k) for i in fib.labels}
    basis = grading.basis_matrix()
    binv = mx.inverse(basis)
    local = mx.mul_many(binv, u, basis)
    sl = grading.block_slices()
    a = mx.zeros(len(u))
    for i in grading.labels:
        for j in grading.labels:
            if key[i] == key[j]:
                for r in sl[i]:
                    for c in sl[j]:
                        a[r][c] = local[r][c]
    a_v = mx.mul_many(basis, a, binv)
    return a_v, mx.mul(mx.inverse(a_v), u)
