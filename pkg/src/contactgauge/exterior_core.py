"""Exterior algebra of (R^7)* in the orthonormal contact coframe e^1..e^7.

Forms are sparse maps from blades to scalars.  Three scalar towers are
supported: exact rationals (``Fraction``), exact Gaussian rationals
(:class:`GaussianRational`) and floats.  Exact rationals embed into the
Gaussian rationals; mixing an exact tower with floats raises
:class:`TowerMismatch`.

Internally a blade is a bitmask (bit ``i - 1`` set when ``e^i`` is present);
the public API speaks in increasing index tuples.  The Reeb direction is
``E_7`` and ``eta = e^7``.
"""

from __future__ import annotations

import numbers
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

import numpy as np

DIM = 7
FULL = (1 << DIM) - 1
REEB = 7

# vol = ORIENTATION * e^{1234567}; with +1 this is -eta ^ omega^3 / 3!
ORIENTATION = 1


class TowerMismatch(TypeError):
    """Exact and floating coefficients were combined."""


class GaussianRational:
    """Exact complex number a + b i with rational a, b."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
            return GaussianRational(x, 0)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


I = GaussianRational(0, 1)


def tower_of(x):
    """Return 'Q', 'QI' or 'R' for a scalar."""
    if isinstance(x, GaussianRational):
        return "QI"
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return "Q"
    if isinstance(x, (numbers.Real, numbers.Complex, np.number)):
        return "R"
    raise TypeError(f"unsupported scalar {x!r}")


def join_towers(a, b):
    if a is None:
        return b
    if b is None or a == b:
        return a
    if {a, b} == {"Q", "QI"}:
        return "QI"
    raise TowerMismatch(f"cannot combine scalar towers {a} and {b}")


def _normalize(x):
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, GaussianRational) and x.im == 0:
        return x.re
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.complexfloating):
        return complex(x)
    return x


# -- blade bookkeeping -------------------------------------------------------

def blade_mask(indices) -> int:
    m = 0
    for i in indices:
        m |= 1 << (i - 1)
    return m


@lru_cache(maxsize=None)
def mask_indices(mask: int) -> tuple:
    return tuple(i + 1 for i in range(DIM) if mask >> i & 1)


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@lru_cache(maxsize=None)
def wedge_sign(a: int, b: int) -> int:
    """Sign of e^A ^ e^B relative to e^{A u B}; 0 if the blades overlap."""
    if a & b:
        return 0
    swaps = 0
    for j in range(DIM):
        if b >> j & 1:
            swaps += popcount(a >> (j + 1))
    return -1 if swaps & 1 else 1


@lru_cache(maxsize=None)
def star_blade(mask: int) -> tuple:
    """(sign, complement) with e^I ^ *e^I = vol."""
    comp = FULL ^ mask
    return ORIENTATION * wedge_sign(mask, comp), comp


@lru_cache(maxsize=None)
def basis_masks(k: int) -> tuple:
    """Grade-k blades in lexicographic order of their index tuples."""
    return tuple(blade_mask(c) for c in combinations(range(1, DIM + 1), k))


@lru_cache(maxsize=None)
def basis_position(k: int) -> dict:
    return {m: n for n, m in enumerate(basis_masks(k))}


def _sort_sign(indices):
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    return sign, tuple(sorted(idx))


# -- forms ---------------------------------------------------------------------

class Form:
    """Element of the exterior algebra with sparse blade coefficients."""

    __slots__ = ("_terms", "_tower")

    def __init__(self, terms=None):
        self._terms = {}
        self._tower = None
        if terms:
            for key, c in terms.items():
                if isinstance(key, int):
                    mask, sign = key, 1
                else:
                    for i in key:
                        if not 1 <= i <= DIM:
                            raise ValueError(f"coframe index {i} out of range")
                    sign, srt = _sort_sign(key)
                    if sign == 0:
                        continue
                    mask = blade_mask(srt)
                self._add_term(mask, c if sign == 1 else -c)

    @classmethod
    def _raw(cls, terms, tower):
        f = cls.__new__(cls)
        f._terms = terms
        f._tower = tower
        return f

    def _add_term(self, mask, c):
        c = _normalize(c)
        self._tower = join_towers(self._tower, tower_of(c))
        new = self._terms.get(mask, 0) + c
        if new == 0:
            self._terms.pop(mask, None)
        else:
            self._terms[mask] = _normalize(new)

    # introspection
    @property
    def tower(self):
        return self._tower

    @property
    def terms(self) -> dict:
        return {mask_indices(m): c for m, c in self._terms.items()}

    def items(self):
        return self._terms.items()

    def coeff(self, indices) -> object:
        sign, srt = _sort_sign(indices)
        return sign * self._terms.get(blade_mask(srt), 0)

    def grades(self) -> set:
        return {popcount(m) for m in self._terms}

    @property
    def grade(self) -> int:
        g = self.grades()
        if len(g) > 1:
            raise ValueError("form is not homogeneous")
        return g.pop() if g else 0

    def part(self, k: int) -> Form:
        return Form._raw({m: c for m, c in self._terms.items() if popcount(m) == k},
                         self._tower)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    # arithmetic
    def __add__(self, other):
        if not isinstance(other, Form):
            if other == 0:
                return self
            other = Form({(): other})
        out = Form._raw(dict(self._terms), self._tower)
        for m, c in other._terms.items():
            out._add_term(m, c)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Form._raw({m: -c for m, c in self._terms.items()}, self._tower)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        if isinstance(s, Form):
            return NotImplemented
        s = _normalize(s)
        if s == 0:
            return Form._raw({}, join_towers(self._tower, tower_of(s)))
        tower = join_towers(self._tower, tower_of(s))
        return Form._raw({m: _normalize(c * s) for m, c in self._terms.items()}, tower)

    __rmul__ = __mul__

    def __truediv__(self, s):
        s = _normalize(s)
        if tower_of(s) == "Q":
            return self * (1 / Fraction(s))
        return self * (1 / s)

    def __xor__(self, other):
        return wedge(self, other)

    def __rxor__(self, other):
        return wedge(Form({(): other}), self)

    def __eq__(self, other):
        if isinstance(other, Form):
            return self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def conj(self) -> Form:
        return Form._raw({m: _conj(c) for m, c in self._terms.items()}, self._tower)

    def real(self) -> Form:
        return Form({m: _re(c) for m, c in self._terms.items()})

    def imag(self) -> Form:
        return Form({m: _im(c) for m, c in self._terms.items()})

    def to_float(self) -> Form:
        out = {}
        for m, c in self._terms.items():
            out[m] = complex(c) if isinstance(c, GaussianRational) else float(c)
        return Form(out)

    def map(self, fn) -> Form:
        return Form({m: fn(c) for m, c in self._terms.items()})

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(complex(c)) ** 2 for c in self._terms.values())))

    def render(self) -> str:
        """Canonical text: blades sorted by grade then index, signed coefficients."""
        if not self._terms:
            return "0"
        keys = sorted(self._terms, key=lambda m: (popcount(m), mask_indices(m)))
        out = []
        for n, m in enumerate(keys):
            c = self._terms[m]
            blade = "e^{" + "".join(map(str, mask_indices(m))) + "}" if m else ""
            neg, mag = _split_sign(c)
            if mag == "1" and blade:
                body = blade
            else:
                body = mag + (" " + blade if blade else "")
            if n == 0:
                out.append(("-" if neg else "") + body)
            else:
                out.append((" - " if neg else " + ") + body)
        return "".join(out)

    def __repr__(self):
        return f"Form({self.render()})"


def _conj(c):
    return c.conjugate() if hasattr(c, "conjugate") else c


def _re(c):
    if isinstance(c, GaussianRational):
        return c.re
    if isinstance(c, complex):
        return c.real
    return c


def _im(c):
    if isinstance(c, GaussianRational):
        return c.im
    if isinstance(c, complex):
        return c.imag
    return 0 if tower_of(c) == "Q" else 0.0


def _split_sign(c):
    if isinstance(c, GaussianRational):
        if c.re == 0 and c.im < 0:
            return True, str(-c)
        if c.re < 0 or (c.re == 0 and c.im < 0):
            return True, str(-c)
        return False, str(c)
    if isinstance(c, complex):
        return False, repr(c)
    if c < 0:
        return True, str(-c) if isinstance(c, Fraction) else repr(-c)
    return False, str(c) if isinstance(c, Fraction) else repr(c)


def e(*indices) -> Form:
    """Basis form e^{i1} ^ ... ^ e^{ik} (any order; sign follows the permutation)."""
    return Form({tuple(indices): 1})


def scalar(c) -> Form:
    return Form({(): c})


def zero() -> Form:
    return Form()


# -- operations ----------------------------------------------------------------

def wedge(a: Form, b: Form) -> Form:
    tower = join_towers(a._tower, b._tower)
    out = {}
    for ma, ca in a._terms.items():
        for mb, cb in b._terms.items():
            s = wedge_sign(ma, mb)
            if s:
                m = ma | mb
                v = out.get(m, 0) + (ca * cb if s > 0 else -(ca * cb))
                out[m] = v
    res = {m: _normalize(c) for m, c in out.items() if c != 0}
    return Form._raw(res, tower if res or tower else None)


def wedge_all(*forms) -> Form:
    out = scalar(1)
    for f in forms:
        out = wedge(out, f)
    return out


def contract(v: int, a: Form) -> Form:
    """Interior product by the frame vector E_v (v = 7 is the Reeb field)."""
    if not 1 <= v <= DIM:
        raise ValueError("frame index must be in 1..7")
    bit = 1 << (v - 1)
    out = {}
    for m, c in a._terms.items():
        if m & bit:
            pos = popcount(m & (bit - 1))
            out[m ^ bit] = -c if pos & 1 else c
    return Form._raw(out, a._tower)


def hodge_star(a: Form) -> Form:
    out = {}
    for m, c in a._terms.items():
        s, comp = star_blade(m)
        out[comp] = c if s > 0 else -c
    return Form._raw(out, a._tower)


def inner(a: Form, b: Form, hermitian: bool = False):
    """Pointwise metric pairing; blades are orthonormal."""
    join_towers(a._tower, b._tower)
    total = 0
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    for m, c in small._terms.items():
        d = big._terms.get(m)
        if d is None:
            continue
        if hermitian:
            ca = a._terms[m]
            cb = b._terms[m]
            total = total + _conj(ca) * cb
        else:
            total = total + c * d
    return _normalize(total)


def volume() -> Form:
    return Form({FULL: ORIENTATION})


def compat_residual(a: Form) -> Form:
    """i_xi(*a) - (-1)^p *(eta ^ a) for a homogeneous form of grade p."""
    p = a.grade
    lhs = contract(REEB, hodge_star(a))
    rhs = hodge_star(wedge(e(REEB), a))
    return lhs - rhs if p % 2 == 0 else lhs + rhs


# -- matrices -----------------------------------------------------------------

def coordinates(a: Form, k: int) -> list:
    """Coefficient vector of the grade-k part of ``a`` in lexicographic blade order."""
    pos = basis_position(k)
    vec = [0] * len(pos)
    for m, c in a._terms.items():
        if popcount(m) == k:
            vec[pos[m]] = c
    return vec


def from_coordinates(vec, k: int) -> Form:
    return Form({m: c for m, c in zip(basis_masks(k), vec) if c != 0})


def matrix_of(fn, k_in: int, k_out: int, exact: bool = False):
    """Matrix of a linear map Lambda^k_in -> Lambda^k_out in blade coordinates.

    With ``exact`` a list of rows of exact scalars is returned, otherwise a
    numpy array (complex if any entry is complex).
    """
    cols = [coordinates(fn(Form({m: 1})), k_out) for m in basis_masks(k_in)]
    rows = [list(r) for r in zip(*cols)] if cols else []
    if exact:
        return rows
    if any(isinstance(c, (GaussianRational, complex)) for r in rows for c in r):
        return np.array([[complex(c) for c in r] for r in rows], dtype=complex).reshape(
            len(basis_masks(k_out)), len(basis_masks(k_in)))
    return np.array([[float(c) for c in r] for r in rows], dtype=float).reshape(
        len(basis_masks(k_out)), len(basis_masks(k_in)))
