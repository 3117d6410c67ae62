"""Stokes representations of the wild surface group at one marked point.

Generators are A1, B1, ..., Ag, Bg, h, S1, ..., Sr.  Words are whitespace
separated generator names, a trailing ' marks an inverse, and a word is
multiplied left to right as written.  The defining relation is

    A1 B1 A1' B1' ... Ag Bg Ag' Bg' h Sr ... S1 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import matrix as mx
from .exact import GaussianRational, parse_rat, rat_str
from .flagged import Grading, QuiverOrder, Subspace, stokes_group_membership
from .irregular import CoverPoint, Fiber, IrregularClass
from .structures import (
    BoundaryPresentation,
    Check,
    Report,
    StokesGradedLS,
    StokesLocalSystem,
    choose_basepoint,
    graded_to_stokes_ls,
    label_from_json,
    label_to_json,
    stokes_ls_to_graded,
    surface_product,
)


class UnknownGenerator(KeyError):
    pass


@dataclass
class WildSurfaceData:
    genus: int
    theta: IrregularClass
    basepoint: Fraction
    singular: list          # singular directions after the basepoint
    labels: list            # fiber labels in block order
    dims: dict              # label -> block size
    shift: dict             # cover monodromy on labels
    orders: list            # QuiverOrder per singular direction

    @property
    def rank(self) -> int:
        return sum(self.dims.values())

    @property
    def generators(self) -> list:
        out = []
        for g in range(1, self.genus + 1):
            out += [f"A{g}", f"B{g}"]
        out.append("h")
        out += [f"S{t}" for t in range(1, len(self.singular) + 1)]
        return out

    @property
    def relation(self) -> str:
        parts = []
        for g in range(1, self.genus + 1):
            parts += [f"A{g}", f"B{g}", f"A{g}'", f"B{g}'"]
        parts.append("h")
        parts += [f"S{t}" for t in range(len(self.singular), 0, -1)]
        return " ".join(parts)

    def blocks(self) -> dict:
        out, pos = {}, 0
        for i in self.labels:
            out[i] = range(pos, pos + self.dims[i])
            pos += self.dims[i]
        return out

    def standard_grading(self) -> Grading:
        n = self.rank
        return Grading(n, {i: Subspace.coordinate(n, b) for i, b in self.blocks().items()},
                       self.labels, check=False)

    def block_patterns(self) -> dict:
        """Allowed nonzero blocks (row label, column label) off the diagonal for each S slot."""
        out = {f"S{t}": sorted(o.closure, key=repr) for t, o in enumerate(self.orders, start=1)}
        out["h"] = [(self.shift[i], i) for i in self.labels]
        return out


def build_presentation(genus: int, theta: IrregularClass, basepoint=None) -> WildSurfaceData:
    fib = Fiber.of_class(theta)
    beta = choose_basepoint(fib) if basepoint is None else Fraction(basepoint)
    b = BoundaryPresentation(theta, beta)
    fr = b.frame()
    return WildSurfaceData(genus, theta, beta, list(fr.singular), list(fib.labels), dict(fib.mults),
                           dict(fib.shift), [fr.arrows(a) for a in fr.singular])


class StokesRepresentation:
    kind = "rep"

    def __init__(self, matrices: dict):
        self.matrices = dict(matrices)

    def __getitem__(self, name):
        return self.matrices[name]

    def __eq__(self, other):
        return (isinstance(other, StokesRepresentation) and self.matrices.keys() == other.matrices.keys()
                and all(mx.equal(self.matrices[k], other.matrices[k]) for k in self.matrices))

    def to_json(self, w: WildSurfaceData) -> dict:
        return {
            "kind": self.kind,
            "version": 1,
            "class": w.theta.to_json(),
            "genus": w.genus,
            "basepoint": {"pi_multiple": rat_str(w.basepoint)},
            "generators": {k: mx.to_json(self.matrices[k]) for k in w.generators},
        }

    @classmethod
    def from_json(cls, d):
        theta = IrregularClass.from_json(d["class"])
        w = build_presentation(int(d["genus"]), theta, parse_rat(d["basepoint"]["pi_multiple"]))
        mats = {k: mx.from_json(v) for k, v in d["generators"].items()}
        return w, cls(mats)


def _tokens(word: str):
    for tok in word.split():
        inv = tok.endswith("'")
        yield tok.rstrip("'"), inv


def transport(w: WildSurfaceData, rep: StokesRepresentation, word: str):
    out = mx.identity(w.rank)
    for name, inv in _tokens(word):
        if name not in rep.matrices:
            raise UnknownGenerator(name)
        m = rep.matrices[name]
        out = mx.mul(out, mx.inverse(m) if inv else m)
    return out


def validate_rep(w: WildSurfaceData, rep: StokesRepresentation) -> Report:
    out = Report("rep")
    n = w.rank
    for name in w.generators:
        m = rep.matrices.get(name)
        if m is None:
            out.structural.append(f"missing generator {name}")
        elif len(m) != n or any(len(r) != n for r in m):
            out.structural.append(f"{name} is not {n}x{n}")
    if out.structural:
        return out
    for name in w.generators:
        if not mx.det(rep[name]):
            out.structural.append(f"{name} is singular")
    if out.structural:
        return out
    std = w.standard_grading()
    h = rep["h"]
    ok = all(std[i].image(h) == std[w.shift[i]] for i in w.labels)
    out.checks.append(Check(w.basepoint, "twist", ok, "" if ok else "h does not follow the cover monodromy"))
    for t, (a, order) in enumerate(zip(w.singular, w.orders), start=1):
        ok = stokes_group_membership(rep[f"S{t}"], std, order)
        out.checks.append(Check(a, "Sto", ok, "" if ok else f"S{t} is off its block pattern"))
    ok = mx.is_identity(transport(w, rep, w.relation))
    out.checks.append(Check(w.basepoint, "relation", ok, "" if ok else "relation word is not the identity"))
    return out


def is_graded(w: WildSurfaceData, u) -> bool:
    std = w.standard_grading()
    return all(std[i].image(u) == std[i] for i in w.labels)


def twisted_conjugate(w: WildSurfaceData, rep: StokesRepresentation, u) -> StokesRepresentation:
    if not is_graded(w, u):
        raise ValueError("u does not preserve the grading of the standard fibre")
    ui = mx.inverse(u)
    return StokesRepresentation({k: mx.mul_many(u, m, ui) for k, m in rep.matrices.items()})


def wilson_loop(w: WildSurfaceData, rep: StokesRepresentation, cycle, word: str) -> GaussianRational:
    """Trace of the composite of the blocks of transport(word) along the cycle."""
    cycle = list(cycle)
    if not cycle:
        raise ValueError("a cycle needs at least one node")
    m = transport(w, rep, word)
    bl = w.blocks()

    def block(i, j):  # Hom(F_j, F_i)
        return [[m[r][c] for c in bl[j]] for r in bl[i]]

    acc = None
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        blk = block(b, a)
        acc = blk if acc is None else mx.mul(blk, acc)
    return mx.trace(acc)


def graded_framing(w: WildSurfaceData, grading0: Grading):
    """Columns: the echelon bases of the pieces, in block order."""
    return grading0.basis_matrix(w.labels)


def rep_from_sgls(s: StokesGradedLS, framing=None):
    """(W, rep) read off a valid Stokes graded local system."""
    b = s.boundary
    w = build_presentation(b.genus, b.theta, b.basepoint)
    ls = graded_to_stokes_ls(s)
    p = graded_framing(w, ls.grading0) if framing is None else framing
    pi = mx.inverse(p)
    std = w.standard_grading()
    if any(std[i].image(p) != ls.grading0[i] for i in w.labels):
        raise ValueError("framing is not graded")
    conj = lambda m: mx.mul_many(pi, m, p)
    mats = {}
    for g, (a, bb) in enumerate(b.handles, start=1):
        mats[f"A{g}"], mats[f"B{g}"] = conj(a), conj(bb)
    mats["h"] = conj(ls.formal_monodromy)
    for t, st in enumerate(ls.stokes, start=1):
        mats[f"S{t}"] = conj(st)
    return w, StokesRepresentation(mats)


def sgls_from_rep(w: WildSurfaceData, rep: StokesRepresentation) -> StokesGradedLS:
    n = w.rank
    handles = [(rep[f"A{g}"], rep[f"B{g}"]) for g in range(1, w.genus + 1)]
    rho = mx.inverse(surface_product(handles, n))
    b = BoundaryPresentation(w.theta, w.basepoint, rho, handles)
    ls = StokesLocalSystem(b, w.standard_grading(), rep["h"],
                           [rep[f"S{t}"] for t in range(1, len(w.singular) + 1)])
    return stokes_ls_to_graded(ls)


def cycle_from_json(data) -> list[CoverPoint]:
    return [label_from_json(x) for x in data]


def cycle_to_json(cycle) -> list:
    return [label_to_json(x) for x in cycle]
