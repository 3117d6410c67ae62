"""Dense exact matrices over Q(i), stored as lists of rows."""
from __future__ import annotations

from .exact import ONE, ZERO, GaussianRational

G = GaussianRational


def gr(x) -> GaussianRational:
    return x if type(x) is GaussianRational else GaussianRational.coerce(x)


def mat(rows) -> list[list[GaussianRational]]:
    return [[gr(x) for x in row] for row in rows]


def identity(n: int):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def zeros(n: int, m: int | None = None):
    m = n if m is None else m
    return [[ZERO] * m for _ in range(n)]


def copy(a):
    return [row[:] for row in a]


def shape(a):
    return len(a), (len(a[0]) if a else 0)


def transpose(a):
    return [list(col) for col in zip(*a)]


def mul(a, b):
    bt = list(zip(*b))
    out = []
    for row in a:
        nz = [(k, x) for k, x in enumerate(row) if x]
        new = []
        for col in bt:
            s = ZERO
            for k, x in nz:
                y = col[k]
                if y:
                    s = s + x * y
            new.append(s)
        out.append(new)
    return out


def mul_many(*ms):
    out = ms[0]
    for m in ms[1:]:
        out = mul(out, m)
    return out


def apply(a, v):
    out = []
    for row in a:
        s = ZERO
        for x, y in zip(row, v):
            if x and y:
                s = s + x * y
        out.append(s)
    return out


def add(a, b):
    return [[x + y for x, y in zip(r, s)] for r, s in zip(a, b)]


def sub(a, b):
    return [[x - y for x, y in zip(r, s)] for r, s in zip(a, b)]


def scale(a, c):
    c = gr(c)
    return [[c * x for x in row] for row in a]


def equal(a, b) -> bool:
    return len(a) == len(b) and all(r == s for r, s in zip(a, b))


def is_identity(a) -> bool:
    return equal(a, identity(len(a)))


def is_zero(a) -> bool:
    return all(not x for row in a for x in row)


def conj(a):
    return [[x.conjugate() for x in row] for row in a]


def trace(a):
    s = ZERO
    for i in range(len(a)):
        s = s + a[i][i]
    return s


def rref(rows, ncols: int | None = None):
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return [], []
    ncols = len(m[0]) if ncols is None else ncols
    pivots = []
    r = 0
    for c in range(ncols):
        p = None
        for i in range(r, len(m)):
            if m[i][c]:
                p = i
                break
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        piv = m[r][c]
        if piv != ONE:
            inv = piv.inverse()
            m[r] = [x * inv if x else x for x in m[r]]
        prow = m[r]
        nzc = [k for k in range(c, len(prow)) if prow[k]]
        for i in range(len(m)):
            if i != r:
                f = m[i][c]
                if f:
                    row = m[i]
                    for k in nzc:
                        row[k] = row[k] - f * prow[k]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows) -> int:
    return len(rref(rows)[0])


def inverse(a):
    n = len(a)
    aug = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(a)]
    red, piv = rref(aug, n)
    if len(red) < n or piv != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


def det(a):
    m = copy(a)
    n = len(m)
    d = ONE
    for c in range(n):
        p = None
        for i in range(c, n):
            if m[i][c]:
                p = i
                break
        if p is None:
            return ZERO
        if p != c:
            m[c], m[p] = m[p], m[c]
            d = -d
        piv = m[c][c]
        d = d * piv
        inv = piv.inverse()
        for i in range(c + 1, n):
            f = m[i][c]
            if f:
                f = f * inv
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return d


def nullspace(a, ncols: int | None = None):
    """Basis of {x : a x = 0} as a list of vectors."""
    ncols = len(a[0]) if a else (ncols or 0)
    red, piv = rref(a, ncols)
    free = [c for c in range(ncols) if c not in piv]
    out = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for row, p in zip(red, piv):
            v[p] = -row[f]
        out.append(v)
    return out


def solve_left(basis_rows, targets):
    """Coefficients x with x . basis_rows = t for each target row t.

    basis_rows must be independent.  Raises ValueError when a target is not
    in their span.
    """
    if not targets:
        return []
    k = len(basis_rows)
    if k == 0:
        if any(any(t) for t in targets):
            raise ValueError("target not in span")
        return [[] for _ in targets]
    n = len(targets[0])
    aug = [[b[r] for b in basis_rows] + [t[r] for t in targets] for r in range(n)]
    red, piv = rref(aug)
    if piv[:k] != list(range(k)):
        raise ValueError("basis rows are dependent")
    if len(piv) > k:
        raise ValueError("target not in span")
    return [[red[i][k + j] for i in range(k)] for j in range(len(targets))]


def from_columns(cols):
    return transpose(cols)


def to_json(a) -> list:
    return [[x.to_json() for x in row] for row in a]


def from_json(data):
    return [[GaussianRational.from_json(x) for x in row] for row in data]


def fmt(a) -> str:
    return "[" + ", ".join("[" + ", ".join(str(x) for x in row) + "]" for row in a) + "]"
