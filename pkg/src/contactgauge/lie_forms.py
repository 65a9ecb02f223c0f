"""Lie-algebra-valued forms: graded bracket, trace pairing, the ideal generated by
Omega^2_8 and canonical representatives of the quotient L^k.

A LieForm stores, for every blade, a coefficient vector in a fixed basis of the
Lie algebra.  Brackets go through exact structure constants, so exact towers
stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from . import exact_linalg as xl
from .exterior_core import (
    Form, _normalize, basis_masks, basis_position, coordinates, from_coordinates,
    join_towers, popcount, tower_of, wedge, wedge_sign,
)
from .sasaki_ops import eigen_basis, structure_forms


class AlgebraMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    name: str
    basis: tuple            # complex matrices
    structure: tuple        # structure[a][b] = exact coefficients of [X_a, X_b]
    metric: tuple           # exact Gram matrix of <X, Y> = -tr(XY)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def bracket(self, x, y):
        n = self.dim
        out = [0] * n
        for a in range(n):
            if x[a] == 0:
                continue
            for b in range(n):
                if y[b] == 0:
                    continue
                xy = x[a] * y[b]
                for c, s in enumerate(self.structure[a][b]):
                    if s:
                        out[c] = out[c] + s * xy
        return [_normalize(c) for c in out]

    def pair(self, x, y):
        n = self.dim
        tot = 0
        for a in range(n):
            if x[a] == 0:
                continue
            for b in range(n):
                g = self.metric[a][b]
                if g and y[b] != 0:
                    tot = tot + g * x[a] * y[b]
        return _normalize(tot)

    def matrix(self, x) -> np.ndarray:
        return sum(complex(c) * m for c, m in zip(x, self.basis))

    def float_structure(self) -> np.ndarray:
        return np.array([[[float(c) for c in row] for row in rows] for rows in self.structure])

    def float_metric(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.metric])

    def check(self) -> dict:
        """Exact antisymmetry/Jacobi on the basis plus agreement with the matrices."""
        n = self.dim
        e = [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
        anti = all(self.bracket(e[a], e[b]) == [-c for c in self.bracket(e[b], e[a])]
                   for a in range(n) for b in range(n))
        jac = True
        for a, b, c in product(range(n), repeat=3):
            t = [x + y + z for x, y, z in zip(
                self.bracket(e[a], self.bracket(e[b], e[c])),
                self.bracket(e[b], self.bracket(e[c], e[a])),
                self.bracket(e[c], self.bracket(e[a], e[b])))]
            jac &= all(x == 0 for x in t)
        mats = max((np.abs(self.basis[a] @ self.basis[b] - self.basis[b] @ self.basis[a]
                           - self.matrix(self.structure[a][b])).max()
                    for a in range(n) for b in range(n)), default=0.0)
        gram = max((abs(-np.trace(self.basis[a] @ self.basis[b]) - float(self.metric[a][b]))
                    for a in range(n) for b in range(n)), default=0.0)
        return {"antisymmetry": anti, "jacobi": jac, "matrix_residual": float(mats),
                "metric_residual": float(gram)}


@lru_cache(maxsize=None)
def su2() -> LieAlgebra:
    """2x2 traceless anti-Hermitian matrices, tau_a = -(i/2) sigma_a, [tau_a, tau_b] = eps_abc tau_c."""
    pauli = [np.array([[0, 1], [1, 0]], complex), np.array([[0, -1j], [1j, 0]]),
             np.array([[1, 0], [0, -1]], complex)]
    basis = tuple(-0.5j * s for s in pauli)
    st = []
    for a in range(3):
        row = []
        for b in range(3):
            c = [Fraction(0)] * 3
            for k in range(3):
                c[k] = Fraction(_levi_civita(a, b, k))
            row.append(tuple(c))
        st.append(tuple(row))
    metric = tuple(tuple(Fraction(1, 2) if a == b else Fraction(0) for b in range(3)) for a in range(3))
    return LieAlgebra("su2", basis, tuple(st), metric)


@lru_cache(maxsize=None)
def abelian(dim: int = 1) -> LieAlgebra:
    """u(1)^dim realised by diagonal imaginary matrices with <X_a, X_b> = delta_ab."""
    basis = tuple(np.diag([1j if i == a else 0 for i in range(dim)]) for a in range(dim))
    st = tuple(tuple(tuple(Fraction(0) for _ in range(dim)) for _ in range(dim)) for _ in range(dim))
    metric = tuple(tuple(Fraction(int(a == b)) for b in range(dim)) for a in range(dim))
    return LieAlgebra(f"u1^{dim}" if dim > 1 else "u1", basis, st, metric)


def algebra_by_name(name: str) -> LieAlgebra:
    if name == "su2":
        return su2()
    if name.startswith("abelian") or name.startswith("u1"):
        for sep in (":", "^"):
            if sep in name:
                return abelian(int(name.split(sep)[-1]))
        return abelian(1)
    raise ValueError(f"unknown Lie algebra {name!r}")


def _levi_civita(a, b, c):
    if len({a, b, c}) < 3:
        return 0
    return 1 if (a, b, c) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1


# -- LieForm -----------------------------------------------------------------------

class LieForm:
    """Form with coefficients in a Lie algebra, stored per blade mask."""

    __slots__ = ("algebra", "_terms", "_tower")

    def __init__(self, algebra: LieAlgebra, terms=None):
        self.algebra = algebra
        self._terms = {}
        self._tower = None
        for key, vec in (terms or {}).items():
            f = Form({key: 1})
            for m, s in f.items():
                self._add(m, [s * c for c in vec])

    def _add(self, mask, vec):
        vec = [_normalize(c) for c in vec]
        if len(vec) != self.algebra.dim:
            raise ValueError("coefficient vector has the wrong length")
        for c in vec:
            if c != 0:
                self._tower = join_towers(self._tower, tower_of(c))
        old = self._terms.get(mask)
        new = vec if old is None else [_normalize(x + y) for x, y in zip(old, vec)]
        if all(c == 0 for c in new):
            self._terms.pop(mask, None)
        else:
            self._terms[mask] = new

    @classmethod
    def from_components(cls, algebra: LieAlgebra, comps) -> LieForm:
        """Build sum_a X_a (x) comps[a]."""
        out = cls(algebra)
        for a, f in enumerate(comps):
            for m, c in f.items():
                vec = [0] * algebra.dim
                vec[a] = c
                out._add(m, vec)
        return out

    @classmethod
    def tensor(cls, algebra: LieAlgebra, x, f: Form) -> LieForm:
        """The element x (x) f for a Lie algebra vector x and scalar form f."""
        out = cls(algebra)
        for m, c in f.items():
            out._add(m, [c * xi for xi in x])
        return out

    @property
    def tower(self):
        return self._tower

    @property
    def components(self) -> list:
        return [Form({m: v[a] for m, v in self._terms.items() if v[a] != 0})
                for a in range(self.algebra.dim)]

    def items(self):
        return self._terms.items()

    def grades(self) -> set:
        return {popcount(m) for m in self._terms}

    def part(self, k: int) -> LieForm:
        out = LieForm(self.algebra)
        out._terms = {m: list(v) for m, v in self._terms.items() if popcount(m) == k}
        out._tower = self._tower
        return out

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def _check(self, other):
        if other.algebra is not self.algebra:
            raise AlgebraMismatch(f"{self.algebra.name} vs {other.algebra.name}")

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        self._check(other)
        out = LieForm(self.algebra)
        out._terms = {m: list(v) for m, v in self._terms.items()}
        out._tower = self._tower
        for m, v in other._terms.items():
            out._add(m, v)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        out = LieForm(self.algebra)
        for m, v in self._terms.items():
            out._add(m, [c * s for c in v])
        if not out._terms:
            out._tower = self._tower
        return out

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LieForm):
            return NotImplemented
        return self.algebra is other.algebra and self._terms == other._terms

    def __hash__(self):
        return hash(tuple(sorted((m, tuple(v)) for m, v in self._terms.items())))

    def to_float(self) -> LieForm:
        out = LieForm(self.algebra)
        for m, v in self._terms.items():
            out._add(m, [complex(c) if not isinstance(c, (int, Fraction, float)) else float(c) for c in v])
        return out

    def norm(self) -> float:
        g = self.algebra.float_metric()
        tot = 0.0
        for v in self._terms.values():
            x = np.array([complex(c) for c in v])
            tot += float(np.real(np.conj(x) @ g @ x))
        return float(np.sqrt(tot))

    def map_forms(self, fn) -> LieForm:
        """Apply a linear map of scalar forms componentwise."""
        return LieForm.from_components(self.algebra, [fn(f) for f in self.components])

    def __repr__(self):
        parts = [f"[{a}]({f.render()})" for a, f in enumerate(self.components) if f]
        return f"LieForm<{self.algebra.name}>(" + " + ".join(parts) + ")" if parts else \
            f"LieForm<{self.algebra.name}>(0)"


def form_wedge_lie(f: Form, a: LieForm) -> LieForm:
    """f ^ a for a scalar form f."""
    out = LieForm(a.algebra)
    for mf, cf in f.items():
        for ma, va in a.items():
            s = wedge_sign(mf, ma)
            if s:
                out._add(mf | ma, [s * cf * c for c in va])
    return out


def lie_wedge_form(a: LieForm, f: Form) -> LieForm:
    out = LieForm(a.algebra)
    for ma, va in a.items():
        for mf, cf in f.items():
            s = wedge_sign(ma, mf)
            if s:
                out._add(ma | mf, [s * cf * c for c in va])
    return out


def bracket_wedge(a: LieForm, b: LieForm) -> LieForm:
    """[a ^ b] = sum e^I ^ e^J [a_I, b_J]."""
    a._check(b)
    g = a.algebra
    out = LieForm(g)
    for ma, va in a.items():
        for mb, vb in b.items():
            s = wedge_sign(ma, mb)
            if s:
                br = g.bracket(va, vb)
                if any(c != 0 for c in br):
                    out._add(ma | mb, [s * c for c in br])
    return out


def graded_symmetry_sign(p: int, q: int) -> int:
    """Sign with [a ^ b] = sign * [b ^ a] for grades p, q."""
    return -1 if (p * q) % 2 == 0 else 1


def jacobi_residual(a: LieForm, b: LieForm, c: LieForm, p: int, q: int, r: int,
                    convention: str = "standard") -> LieForm:
    """Graded Jacobi sum.

    ``standard``: (-1)^{pr}[[a,b],c] + (-1)^{qp}[[b,c],a] + (-1)^{rq}[[c,a],b].
    ``stated``: [[a,b],c] + (-1)^{pq+qr}[[b,c],a] + (-1)^{qr+pr}[[c,a],b].
    """
    t1 = bracket_wedge(bracket_wedge(a, b), c)
    t2 = bracket_wedge(bracket_wedge(b, c), a)
    t3 = bracket_wedge(bracket_wedge(c, a), b)
    if convention == "standard":
        s = ((-1) ** (p * r), (-1) ** (q * p), (-1) ** (r * q))
    elif convention == "stated":
        s = (1, (-1) ** (p * q + q * r), (-1) ** (q * r + p * r))
    else:
        raise ValueError(convention)
    return t1 * s[0] + t2 * s[1] + t3 * s[2]


def mc_residual(dA_a: LieForm, a: LieForm) -> LieForm:
    """d_A a + 1/2 [a ^ a]."""
    half = Fraction(1, 2) if a.tower != "R" else 0.5
    return dA_a + bracket_wedge(a, a) * half


def trace_pair(a: LieForm, b: LieForm) -> Form:
    """Scalar form <a ^ b> using the positive invariant metric <X, Y> = -tr(XY)."""
    a._check(b)
    g = a.algebra
    out = {}
    for ma, va in a.items():
        for mb, vb in b.items():
            s = wedge_sign(ma, mb)
            if s:
                v = g.pair(va, vb)
                if v != 0:
                    out[ma | mb] = out.get(ma | mb, 0) + s * v
    return Form({m: c for m, c in out.items() if c != 0})


# -- the ideal and the quotient complex ------------------------------------------------

def ideal_generators(variant: str = "8") -> tuple:
    """Generators of the ideal, as scalar forms.

    ``"8"``: Omega^2_8 together with Theta_+ and Theta_-.  This is the ideal whose
    quotient has L^2 = Omega^2_6 + Omega^2_1 + eta ^ Omega^1_H, L^3 = eta ^ (Omega^2_6 +
    Omega^2_1) and L^k = 0 for k >= 4.  Omega^2_8 alone does not generate Theta_+-,
    which have type (3,0)+(0,3); ``"8-only"`` is that smaller ideal.
    ``"6"``: Omega^2_6.
    """
    eb = eigen_basis()
    if variant == "8":
        sf = structure_forms()
        return eb.w + (sf.theta_plus, sf.theta_minus)
    if variant == "8-only":
        return eb.w
    if variant == "6":
        return eb.v
    raise ValueError("variant must be '8', '8-only' or '6'")


@lru_cache(maxsize=None)
def ideal_basis(k: int, variant: str = "8") -> tuple:
    """Exact basis (coordinate rows) of the degree-k part of the ideal."""
    rows = []
    for g in ideal_generators(variant):
        d = g.grade
        if d > k:
            continue
        for m in basis_masks(k - d):
            rows.append(coordinates(wedge(g, Form({m: 1})), k))
    if not rows:
        return ()
    return tuple(tuple(r) for r in xl.row_space_basis(rows))


@lru_cache(maxsize=None)
def quotient_projector(k: int, variant: str = "8") -> tuple:
    """Exact orthogonal projector of Lambda^k onto the complement of the ideal."""
    n = len(basis_masks(k))
    pi = xl.orthogonal_projector([list(r) for r in ideal_basis(k, variant)], n)
    return tuple(tuple(_normalize(Fraction(int(i == j)) - pi[i][j]) for j in range(n))
                 for i in range(n))


@lru_cache(maxsize=None)
def quotient_projector_float(k: int, variant: str = "8") -> np.ndarray:
    return np.array([[float(c) for c in r] for r in quotient_projector(k, variant)])


def quotient_dim(k: int, variant: str = "8") -> int:
    return len(basis_masks(k)) - len(ideal_basis(k, variant))


@lru_cache(maxsize=None)
def quotient_frame(k: int, variant: str = "8") -> np.ndarray:
    """Orthonormal float basis (rows) of the representative space L^k in Lambda^k."""
    p = quotient_projector_float(k, variant)
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5].T.copy()


def reduce_form(a: Form, variant: str = "8") -> Form:
    out = Form()
    for k in sorted(a.grades()):
        x = coordinates(a.part(k), k)
        if a.tower == "R":
            y = quotient_projector_float(k, variant) @ np.array(x, dtype=complex if any(
                isinstance(c, complex) for c in x) else float)
            y = [c if abs(c) > 1e-15 else 0 for c in y]
        else:
            p = quotient_projector(k, variant)
            y = [sum((pij * xj for pij, xj in zip(row, x) if xj != 0), Fraction(0)) for row in p]
        out = out + from_coordinates(y, k)
    return out


def reduce(a, variant: str = "8"):
    """Canonical representative of the class of ``a`` modulo the ideal, gradewise."""
    if isinstance(a, Form):
        return reduce_form(a, variant)
    return a.map_forms(lambda f: reduce_form(f, variant))


def ideal_member(a, variant: str = "8") -> bool:
    r = reduce(a, variant)
    return r.is_zero()


def random_ideal_element(rng, k: int, variant: str = "8", scale: int = 3) -> Form:
    rows = ideal_basis(k, variant)
    out = [Fraction(0)] * len(basis_masks(k))
    for r in rows:
        c = int(rng.integers(-scale, scale + 1))
        if c:
            out = [x + c * y for x, y in zip(out, r)]
    return from_coordinates(out, k)


def random_form(rng, k: int, scale: int = 3, density: float = 0.5) -> Form:
    terms = {}
    for m in basis_masks(k):
        if rng.random() < density:
            c = int(rng.integers(-scale, scale + 1))
            if c:
                terms[m] = Fraction(c, int(rng.integers(1, 4)))
    return Form(terms)


def random_lie_form(rng, algebra: LieAlgebra, k: int, scale: int = 3, density: float = 0.5) -> LieForm:
    return LieForm.from_components(algebra, [random_form(rng, k, scale, density)
                                             for _ in range(algebra.dim)])


def blade_index(k: int) -> dict:
    return basis_position(k)
