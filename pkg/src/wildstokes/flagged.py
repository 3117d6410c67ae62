"""Exact graded and filtered linear algebra over Q(i).

Vectors are column vectors; a matrix M acts by v -> M v.  A grading assigns a
subspace to each label, a filtration assigns the nested subspaces F(i) (all
pieces up to and including i) along a total order of the labels.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Hashable, Iterable, Sequence

from . import matrix as mx
from .exact import ONE, ZERO, GaussianRational


class Subspace:
    """A subspace of Q(i)^n held as a reduced row echelon basis."""

    __slots__ = ("n", "basis", "pivots", "_hash")

    def __init__(self, n: int, basis=(), _reduced: bool = False, _pivots=None):
        self.n = n
        if _reduced:
            self.basis = tuple(tuple(r) for r in basis)
            self.pivots = tuple(_pivots)
        else:
            red, piv = mx.rref([list(v) for v in basis], n) if basis else ([], [])
            self.basis = tuple(tuple(r) for r in red)
            self.pivots = tuple(piv)
        self._hash = None

    @classmethod
    def span(cls, n: int, vectors: Iterable) -> Subspace:
        return cls(n, [[mx.gr(x) for x in v] for v in vectors])

    @classmethod
    def zero(cls, n: int) -> Subspace:
        return cls(n, (), True, ())

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(n, mx.identity(n), True, range(n))

    @classmethod
    def coordinate(cls, n: int, indices) -> Subspace:
        idx = sorted(indices)
        rows = [[ONE if c == i else ZERO for c in range(n)] for i in idx]
        return cls(n, rows, True, idx)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def vectors(self) -> list[list[GaussianRational]]:
        return [list(r) for r in self.basis]

    def reduce(self, v) -> list:
        v = list(v)
        for row, p in zip(self.basis, self.pivots):
            f = v[p]
            if f:
                v = [x - f * y if y else x for x, y in zip(v, row)]
        return v

    def contains(self, v) -> bool:
        return not any(self.reduce(v))

    def __le__(self, other: Subspace) -> bool:
        if self.dim > other.dim:
            return False
        return all(other.contains(v) for v in self.basis)

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.n == other.n and self.basis == other.basis

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, self.basis))
        return self._hash

    def __add__(self, other: Subspace) -> Subspace:
        if not other.dim:
            return self
        if not self.dim:
            return other
        return Subspace(self.n, list(self.basis) + list(other.basis))

    def __and__(self, other: Subspace) -> Subspace:
        return intersect(self, other)

    def image(self, m) -> Subspace:
        return Subspace(self.n, [mx.apply(m, v) for v in self.basis])

    def is_zero(self) -> bool:
        return not self.basis

    def annihilator(self) -> Subspace:
        """Functionals vanishing on the subspace (bilinear pairing, no conjugation)."""
        if not self.basis:
            return Subspace.full(self.n)
        return Subspace(self.n, mx.nullspace([list(r) for r in self.basis], self.n))

    def conjugate(self) -> Subspace:
        return Subspace(self.n, [[x.conjugate() for x in r] for r in self.basis])

    def __repr__(self):
        return f"Subspace(n={self.n}, basis={mx.fmt(self.basis)})"

    def to_json(self) -> list:
        return mx.to_json(self.basis)

    @classmethod
    def from_json(cls, n: int, data) -> Subspace:
        return cls(n, mx.from_json(data))


def span(vectors, n: int | None = None) -> Subspace:
    vectors = [mx.mat([v])[0] for v in vectors]
    if n is None:
        n = len(vectors[0])
    return Subspace(n, vectors)


def intersect(a: Subspace, b: Subspace) -> Subspace:
    if not a.dim or not b.dim:
        return Subspace.zero(a.n)
    if a <= b:
        return a
    if b <= a:
        return b
    n = a.n
    zero = [ZERO] * n
    rows = [list(v) + list(v) for v in a.basis] + [list(v) + zero for v in b.basis]
    red, piv = mx.rref(rows, 2 * n)
    out = [r[n:] for r, p in zip(red, piv) if p >= n]
    return Subspace(n, out)


def sum_all(n: int, spaces: Iterable[Subspace]) -> Subspace:
    rows = []
    for s in spaces:
        rows.extend(s.basis)
    return Subspace(n, rows) if rows else Subspace.zero(n)


def complement_in(a: Subspace, b: Subspace) -> Subspace:
    """Deterministic complement of a inside b: greedily add b's echelon rows."""
    if not a <= b:
        raise ValueError("complement_in needs a subspace of the second argument")
    cur = a
    chosen = []
    for v in b.basis:
        if cur.dim == b.dim:
            break
        if not cur.contains(v):
            chosen.append(list(v))
            cur = cur + Subspace(a.n, [list(v)])
    return Subspace(a.n, chosen)


def quotient_basis(b: Subspace, a: Subspace) -> list[list]:
    """Representatives in b of a basis of b / a (the complement's echelon rows)."""
    return complement_in(a, b).vectors()


def subspace_algebra(op: str, *args):
    if op == "intersect":
        return intersect(*args)
    if op == "sum":
        return args[0] + args[1]
    if op == "quotient_basis":
        return quotient_basis(*args)
    if op == "complement_in":
        return complement_in(*args)
    raise ValueError(f"unknown subspace operation {op!r}")


class Grading:
    """Direct sum decomposition V = sum of pieces indexed by labels."""

    __slots__ = ("n", "labels", "pieces")

    def __init__(self, n: int, pieces: dict, labels: Sequence | None = None, check: bool = True):
        self.n = n
        self.labels = tuple(labels) if labels is not None else tuple(pieces)
        self.pieces = dict(pieces)
        if check:
            if set(self.labels) != set(self.pieces):
                raise ValueError("labels and pieces disagree")
            total = sum(p.dim for p in self.pieces.values())
            if total != n or sum_all(n, self.pieces.values()).dim != n:
                raise ValueError("pieces do not form a direct sum decomposition")

    def __getitem__(self, i) -> Subspace:
        return self.pieces[i]

    def dims(self) -> dict:
        return {i: self.pieces[i].dim for i in self.labels}

    def __eq__(self, other):
        if not isinstance(other, Grading):
            return NotImplemented
        return self.n == other.n and self.pieces == other.pieces

    def __hash__(self):
        return hash(frozenset(self.pieces.items()))

    def image(self, m) -> Grading:
        return Grading(self.n, {i: p.image(m) for i, p in self.pieces.items()}, self.labels, check=False)

    def relabel(self, f) -> Grading:
        return Grading(self.n, {f(i): p for i, p in self.pieces.items()},
                       [f(i) for i in self.labels], check=False)

    def conjugate(self) -> Grading:
        return Grading(self.n, {i: p.conjugate() for i, p in self.pieces.items()}, self.labels, check=False)

    def basis_matrix(self, order: Sequence | None = None):
        """Matrix whose columns are the piece bases, concatenated in label order."""
        cols = []
        for i in (order or self.labels):
            cols.extend(self.pieces[i].basis)
        return mx.transpose([list(c) for c in cols])

    def block_slices(self, order: Sequence | None = None) -> dict:
        out, pos = {}, 0
        for i in (order or self.labels):
            d = self.pieces[i].dim
            out[i] = range(pos, pos + d)
            pos += d
        return out

    def __repr__(self):
        return "Grading(" + ", ".join(f"{i}: {mx.fmt(self.pieces[i].basis)}" for i in self.labels) + ")"


class Filtration:
    """Nested subspaces F(i) along the total order `order` (increasing)."""

    __slots__ = ("n", "order", "steps")

    def __init__(self, n: int, order: Sequence, steps: dict, check: bool = True):
        self.n = n
        self.order = tuple(order)
        self.steps = dict(steps)
        if check:
            if set(self.order) != set(self.steps) or len(self.order) != len(self.steps):
                raise ValueError("order and steps disagree")
            prev = Subspace.zero(n)
            for i in self.order:
                if not prev <= self.steps[i]:
                    raise ValueError(f"filtration is not nested at {i}")
                prev = self.steps[i]
            if self.order and prev.dim != n:
                raise ValueError("filtration does not exhaust the space")

    def __getitem__(self, i) -> Subspace:
        return self.steps[i]

    def below(self, i) -> Subspace:
        """F(<i)."""
        k = self.order.index(i)
        return self.steps[self.order[k - 1]] if k else Subspace.zero(self.n)

    def dims(self) -> dict:
        return {i: self.steps[i].dim - self.below(i).dim for i in self.order}

    def __eq__(self, other):
        if not isinstance(other, Filtration):
            return NotImplemented
        return self.n == other.n and self.order == other.order and self.steps == other.steps

    def same_steps(self, other: Filtration) -> bool:
        return self.steps == other.steps

    def image(self, m) -> Filtration:
        return Filtration(self.n, self.order, {i: s.image(m) for i, s in self.steps.items()}, check=False)

    def relabel(self, f) -> Filtration:
        return Filtration(self.n, [f(i) for i in self.order], {f(i): s for i, s in self.steps.items()},
                          check=False)

    def __repr__(self):
        return "Filtration(" + " < ".join(f"{i}: dim {self.steps[i].dim}" for i in self.order) + ")"


class QuiverOrder:
    """A strict partial order given by arrows (i, j) meaning i < j."""

    def __init__(self, nodes: Iterable, arrows: Iterable):
        self.nodes = tuple(nodes)
        rel = {(i, j) for i, j in arrows}
        if any(i == j for i, j in rel):
            raise ValueError("a strict order has no loops")
        # transitive closure
        changed = True
        while changed:
            changed = False
            for (a, b) in list(rel):
                for (c, d) in list(rel):
                    if b == c and (a, d) not in rel:
                        rel.add((a, d))
                        changed = True
        if any((j, i) in rel for i, j in rel):
            raise ValueError("arrows contain a cycle")
        self.closure = frozenset(rel)

    def below(self, j) -> list:
        return [i for i in self.nodes if (i, j) in self.closure]

    def reduction(self) -> set:
        return {(i, j) for i, j in self.closure
                if not any((i, k) in self.closure and (k, j) in self.closure for k in self.nodes)}

    def linear_extension(self) -> list:
        out, left = [], list(self.nodes)
        while left:
            for idx, v in enumerate(left):
                if not any((u, v) in self.closure for u in left if u != v):
                    out.append(left.pop(idx))
                    break
        return out


# ------------------------------------------------------------------ splittings

def assoc_filtration(g: Grading, order: Sequence) -> Filtration:
    order = tuple(order)
    if set(order) != set(g.labels):
        raise ValueError("order must list the grading's labels")
    steps = {}
    rows = []
    for i in order:
        rows.extend(g.pieces[i].basis)
        steps[i] = Subspace(g.n, rows) if rows else Subspace.zero(g.n)
    return Filtration(g.n, order, steps, check=False)


class GradedQuotients:
    """Gr_i = F(i)/F(<i) with chosen representatives and coordinate maps."""

    def __init__(self, f: Filtration):
        self.filtration = f
        self.reps = {}
        for i in f.order:
            self.reps[i] = quotient_basis(f[i], f.below(i))

    def dims(self) -> dict:
        return {i: len(self.reps[i]) for i in self.filtration.order}

    def coords(self, i, vectors) -> list:
        """Coordinates of vectors of F(i) modulo F(<i) in the representative basis."""
        below = self.filtration.below(i)
        basis = self.reps[i] + below.vectors()
        sol = mx.solve_left(basis, [list(v) for v in vectors])
        k = len(self.reps[i])
        return [row[:k] for row in sol]

    def tautological_grading(self) -> Grading:
        """The grading of Gr = sum of Gr_i by its summands, in block coordinates."""
        n = self.filtration.n
        pieces, pos = {}, 0
        for i in self.filtration.order:
            d = len(self.reps[i])
            pieces[i] = Subspace.coordinate(n, range(pos, pos + d))
            pos += d
        return Grading(n, pieces, self.filtration.order, check=False)


def assoc_graded(f: Filtration) -> GradedQuotients:
    return GradedQuotients(f)


def splits(g: Grading, f: Filtration) -> bool:
    if set(g.labels) != set(f.order):
        return False
    return assoc_filtration(g, f.order).steps == f.steps


def _project(v, onto: Subspace, along: Subspace):
    """Component of v in `onto` for the decomposition onto + along."""
    basis = onto.vectors() + along.vectors()
    coeffs = mx.solve_left(basis, [list(v)])[0]
    out = [ZERO] * len(v)
    for c, b in zip(coeffs[:onto.dim], onto.basis):
        if c:
            out = [x + c * y for x, y in zip(out, b)]
    return out


def splitting_iso(g: Grading, f: Filtration):
    """Phi: Gr(V, F) -> V with Gr(Phi) = 1, in the block coordinates of GradedQuotients."""
    if not splits(g, f):
        raise ValueError("grading does not split the filtration")
    gq = GradedQuotients(f)
    cols = []
    for i in f.order:
        below = f.below(i)
        for r in gq.reps[i]:
            cols.append(_project(r, g.pieces[i], below))
    return mx.transpose(cols), gq


# ------------------------------------------------------------- wild monodromy

class IncompatibleError(ValueError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


def forced_precedence(g1: Grading, g2: Grading) -> set:
    """Pairs (i, j): i must come before j in any common order."""
    n = g1.n
    out = set()
    for a, b in ((g1, g2), (g2, g1)):
        for i in a.labels:
            others = sum_all(n, (a.pieces[k] for k in a.labels if k != i))
            for j in b.labels:
                if j != i and not b.pieces[j] <= others:
                    out.add((i, j))
    return out


def _balanced(g1: Grading, g2: Grading, subset) -> bool:
    n = g1.n
    return sum_all(n, (g1.pieces[k] for k in subset)) == sum_all(n, (g2.pieces[k] for k in subset))


def witness_order(g1: Grading, g2: Grading) -> list:
    """A total order whose associated filtrations agree, or IncompatibleError."""
    if set(g1.labels) != set(g2.labels):
        raise IncompatibleError("gradings have different index sets")
    if g1.dims() != g2.dims():
        raise IncompatibleError("dimension vectors differ", certificate=("dims",))
    forced = forced_precedence(g1, g2)
    for i, j in forced:
        if (j, i) in forced:
            raise IncompatibleError(f"{i} and {j} must each precede the other", certificate=(i, j))
    labels = list(g1.labels)
    dead = set()

    def extend(prefix, placed):
        if len(prefix) == len(labels):
            return prefix
        key = frozenset(placed)
        if key in dead:
            return None
        for v in labels:
            if v in placed:
                continue
            if any((u, v) in forced for u in labels if u not in placed and u != v):
                continue
            nxt = placed | {v}
            if _balanced(g1, g2, nxt):
                r = extend(prefix + [v], nxt)
                if r is not None:
                    return r
        dead.add(key)
        return None

    out = extend([], frozenset())
    if out is None:
        raise IncompatibleError("no total order makes the associated filtrations agree",
                                certificate=tuple(sorted(forced, key=repr)))
    return out


def wild_monodromy(g1: Grading, g2: Grading, order: Sequence | None = None):
    """The unipotent g with g(g1(i)) = g2(i) and Gr(g) = 1."""
    if order is None:
        order = witness_order(g1, g2)
    f = assoc_filtration(g1, order)
    if assoc_filtration(g2, order).steps != f.steps:
        raise IncompatibleError("the given order is not a common witness")
    n = g1.n
    src, dst = [], []
    for i in order:
        below = f.below(i)
        onto = g2.pieces[i]
        if not g1.pieces[i].dim:
            continue
        basis = onto.vectors() + below.vectors()
        sol = mx.solve_left(basis, [list(v) for v in g1.pieces[i].basis])
        for v, coeffs in zip(g1.pieces[i].basis, sol):
            w = [ZERO] * n
            for c, b in zip(coeffs[:onto.dim], onto.basis):
                if c:
                    w = [x + c * y for x, y in zip(w, b)]
            src.append(list(v))
            dst.append(w)
    return mx.mul(mx.transpose(dst), mx.inverse(mx.transpose(src)))


def map_between_gradings(g1: Grading, g2: Grading, blocks: dict):
    """The linear map sending g1(i) to g2(i) via the given block matrices in echelon bases."""
    src, dst = [], []
    for i in g1.labels:
        a, b = g1.pieces[i].basis, g2.pieces[i].basis
        blk = blocks[i]
        for c, v in enumerate(a):
            w = [ZERO] * g1.n
            for r, u in enumerate(b):
                x = blk[r][c]
                if x:
                    w = [p + x * q for p, q in zip(w, u)]
            src.append(list(v))
            dst.append(w)
    return mx.mul(mx.transpose(dst), mx.inverse(mx.transpose(src)))


# ----------------------------------------------------------- unipotent calculus

def _nilpotent_check(x, n):
    p = x
    for _ in range(n - 1):
        p = mx.mul(p, x)
    if not mx.is_zero(p):
        raise ValueError("matrix is not nilpotent")


def is_unipotent(u) -> bool:
    n = len(u)
    x = mx.sub(u, mx.identity(n))
    p = x
    for _ in range(n - 1):
        p = mx.mul(p, x)
    return mx.is_zero(p)


def log_unipotent(u):
    n = len(u)
    x = mx.sub(u, mx.identity(n))
    _nilpotent_check(x, n)
    out = mx.zeros(n)
    p = mx.identity(n)
    for k in range(1, n):
        p = mx.mul(p, x)
        if mx.is_zero(p):
            break
        c = Fraction((-1) ** (k + 1), k)
        out = mx.add(out, mx.scale(p, c))
    return out


def exp_nilpotent(x):
    n = len(x)
    _nilpotent_check(x, n)
    out = mx.identity(n)
    p = mx.identity(n)
    fact = 1
    for k in range(1, n):
        p = mx.mul(p, x)
        if mx.is_zero(p):
            break
        fact *= k
        out = mx.add(out, mx.scale(p, Fraction(1, fact)))
    return out


def unipotent_power(u, t):
    return exp_nilpotent(mx.scale(log_unipotent(u), Fraction(t)))


def sqrt_unipotent(u):
    return unipotent_power(u, Fraction(1, 2))


def unipotent_calculus(op: str, m, t=None):
    if op == "log":
        return log_unipotent(m)
    if op == "exp":
        return exp_nilpotent(m)
    if op == "sqrt":
        return sqrt_unipotent(m)
    if op == "power":
        return unipotent_power(m, t)
    raise ValueError(f"unknown operation {op!r}")


def median_grading(g1: Grading, g2: Grading) -> Grading:
    r = sqrt_unipotent(wild_monodromy(g1, g2))
    return g1.image(r)


# --------------------------------------------------------------- Stokes groups

def stokes_group_membership(u, g: Grading, order: QuiverOrder) -> bool:
    """u - 1 maps each g(j) into the sum of the g(i) with i < j."""
    n = g.n
    x = mx.sub(u, mx.identity(n))
    for j in g.labels:
        target = sum_all(n, (g.pieces[i] for i in order.below(j)))
        for v in g.pieces[j].basis:
            if not target.contains(mx.apply(x, v)):
                return False
    return True


def check_grading_pair(g1: Grading, g2: Grading, order: QuiverOrder):
    """(True, g) when the wild monodromy exists and lies in Sto(g1, order)."""
    if set(g1.labels) != set(g2.labels):
        return False, None
    if g1 == g2:
        return True, mx.identity(g1.n)
    lin = order.linear_extension()
    if assoc_filtration(g1, lin).steps != assoc_filtration(g2, lin).steps:
        return False, None
    g = wild_monodromy(g1, g2, lin)
    if not stokes_group_membership(g, g1, order):
        return False, None
    if not stokes_group_membership(g, g2, order):
        raise AssertionError("Stokes groups of the two gradings differ")
    return True, g


def m_matrix(f1: Filtration, f2: Filtration) -> dict:
    """Relative position counts m(i, j) of two filtrations."""
    cache = {}

    def dim_cap(a, b):
        # dim(A & B) = dim A + dim B - dim(A + B)
        if not a.dim or not b.dim:
            return 0
        key = (a, b)
        if key not in cache:
            cache[key] = a.dim + b.dim - (a + b).dim
        return cache[key]
    out = {}
    for i in f1.order:
        a, a_ = f1[i], f1.below(i)
        for j in f2.order:
            b, b_ = f2[j], f2.below(j)
            out[(i, j)] = dim_cap(a, b) - dim_cap(a_, b) - dim_cap(a, b_) + dim_cap(a_, b_)
    return out


class NoCommonSplitting(ValueError):
    def __init__(self, certificate):
        i, j, m = certificate
        super().__init__(f"relative position entry m({i}, {j}) = {m} forbids a common splitting")
        self.certificate = certificate


def common_splitting(f1: Filtration, f2: Filtration) -> Grading:
    """A grading splitting both filtrations (each with its own order)."""
    if set(f1.order) != set(f2.order):
        raise ValueError("filtrations have different index sets")
    d1, d2 = f1.dims(), f2.dims()
    if d1 != d2:
        raise ValueError("filtrations have different dimension vectors")
    m = m_matrix(f1, f2)
    for (i, j), v in sorted(m.items(), key=lambda kv: (f1.order.index(kv[0][0]), f2.order.index(kv[0][1]))):
        expected = d1[i] if i == j else 0
        if v != expected:
            raise NoCommonSplitting((i, j, v))
    n = f1.n
    pieces = {}
    for i in f1.order:
        top = intersect(f1[i], f2[i])
        low = intersect(f1.below(i), f2[i]) + intersect(f1[i], f2.below(i))
        pieces[i] = complement_in(low, top)
    g = Grading(n, pieces, f1.order)
    if not (splits(g, f1) and splits(g, f2)):
        raise AssertionError("relative position criterion passed but the constructed grading does not split")
    return g


def unipotent_radical_element(f: Filtration, rnd, entries=(-1, 0, 1)):
    """A random u with (u - 1) F(i) inside F(<i), built in an adapted basis."""
    gq = GradedQuotients(f)
    g = Grading(f.n, {i: Subspace(f.n, gq.reps[i]) for i in f.order}, f.order, check=False)
    basis = g.basis_matrix(f.order)
    slices = g.block_slices(f.order)
    n = f.n
    x = mx.zeros(n)
    for jdx, j in enumerate(f.order):
        for i in f.order[:jdx]:
            for r in slices[i]:
                for c in slices[j]:
                    x[r][c] = GaussianRational(rnd.choice(entries), rnd.choice(entries))
    u = mx.add(mx.identity(n), x)
    return mx.mul_many(basis, u, mx.inverse(basis))
