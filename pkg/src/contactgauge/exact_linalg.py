"""Exact linear algebra over Q and Q(i): fraction-free rank, row reduction, kernels."""

from __future__ import annotations

from fractions import Fraction

from .exterior_core import GaussianRational, _normalize


def _to_exact(rows):
    return [[_normalize(c) for c in r] for r in rows]


def bareiss_rank(rows) -> int:
    """Rank by fraction-free (Bareiss) elimination.

    Entries must be integers; rational matrices are rescaled row by row first,
    which does not change the rank.
    """
    m = [list(r) for r in _integerize(rows)]
    if not m or not m[0]:
        return 0
    nr, nc = len(m), len(m[0])
    rank, prev = 0, 1
    for col in range(nc):
        piv = next((r for r in range(rank, nr) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        for r in range(rank + 1, nr):
            a = m[r][col]
            row, prow = m[r], m[rank]
            for c in range(col + 1, nc):
                row[c] = (p * row[c] - a * prow[c]) // prev
            row[col] = 0
        prev = p
        rank += 1
        if rank == nr:
            break
    return rank


def _integerize(rows):
    out = []
    for r in rows:
        r = [_normalize(c) for c in r]
        if any(isinstance(c, GaussianRational) for c in r):
            raise TypeError("bareiss_rank works over Q; use rank() for Q(i)")
        den = 1
        for c in r:
            den = den * Fraction(c).denominator // _gcd(den, Fraction(c).denominator)
        out.append([int(Fraction(c) * den) for c in r])
    return out


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def rref(rows):
    """Reduced row echelon form with exact arithmetic; returns (matrix, pivot columns)."""
    m = [list(r) for r in _to_exact(rows)]
    if not m:
        return m, []
    nr, nc = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(nc):
        piv = next((i for i in range(r, nr) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c] if isinstance(m[r][c], GaussianRational) else Fraction(1) / m[r][c]
        m[r] = [_normalize(x * inv) for x in m[r]]
        for i in range(nr):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [_normalize(x - f * y) for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == nr:
            break
    return m, pivots


def rank(rows) -> int:
    if rows and all(not isinstance(_normalize(c), GaussianRational) for r in rows for c in r):
        return bareiss_rank(rows)
    return len(rref(rows)[1])


def nullspace(rows, ncols: int | None = None):
    """Basis of the right kernel, as a list of exact vectors."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    m, piv = rref(rows)
    nc = len(m[0])
    free = [c for c in range(nc) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * nc
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = _normalize(-m[i][f])
        basis.append(v)
    return basis


def row_space_basis(rows):
    m, piv = rref(rows)
    return [m[i] for i in range(len(piv))]


def matmul(a, b):
    bt = list(zip(*b))
    return [[_normalize(sum((x * y for x, y in zip(r, c)), Fraction(0))) for c in bt] for r in a]


def inverse(a):
    n = len(a)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(_to_exact(a))]
    m, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [r[n:] for r in m]


def orthogonal_projector(basis, dim: int):
    """Exact orthogonal projector onto span(basis) in Q^dim (real inner product)."""
    if not basis:
        return [[Fraction(0)] * dim for _ in range(dim)]
    b = [list(v) for v in basis]  # rows
    gram = matmul(b, [list(c) for c in zip(*b)])
    gi = inverse(gram)
    bt = [list(c) for c in zip(*b)]
    return matmul(matmul(bt, gi), b)
