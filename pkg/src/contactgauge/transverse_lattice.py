"""Transverse lattice for the xi-invariant sector of the flat contact Calabi-Yau model.

Fields live on a periodic N^6 grid of the transverse torus (volume 1) and carry
full 7-dimensional form coefficients (eta components allowed) with values in a
matrix Lie algebra.  A field of grade k is an array of shape
``(C(7,k), dim g, N, N, N, N, N, N)`` in the lexicographic blade order of
:mod:`exterior_core`.  The exterior derivative is

    d(h e^I) = sum_{i<=6} (d_i h) e^i ^ e^I + h d(e^I),   d e^7 = omega,

with spectral (default) or central-difference derivatives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .exterior_core import (
    REEB, Form, basis_masks, contract, e, hodge_star, mask_indices, matrix_of, wedge,
)
from .lie_forms import LieAlgebra, algebra_by_name, quotient_frame
from .sasaki_ops import (
    _type_split, horizontal_two_form_frames, structure_forms, transverse_star as _tstar_form,
)

AXES = 6
DEFAULT_CAP = 4_000_000


class GridMismatch(ValueError):
    pass


class SizeCapExceeded(RuntimeError):
    pass


# -- fiber matrices ----------------------------------------------------------------

def nb(k: int) -> int:
    return comb(7, k) if 0 <= k <= 7 else 0


@lru_cache(maxsize=None)
def ext_mult(i: int, k: int) -> np.ndarray:
    """Matrix of e^i ^ . from Lambda^k to Lambda^{k+1}."""
    ei = e(i)
    return matrix_of(lambda f: wedge(ei, f), k, k + 1)


@lru_cache(maxsize=None)
def interior(i: int, k: int) -> np.ndarray:
    return matrix_of(lambda f: contract(i, f), k, k - 1)


@lru_cache(maxsize=None)
def structure_d(k: int) -> np.ndarray:
    """Constant-coefficient part of d: the derivation extending d e^7 = omega."""
    om = structure_forms().omega

    def fn(f):
        out = Form()
        for m, c in f.items():
            idx = mask_indices(m)
            if REEB in idx:
                # e^I = e^{I'} ^ e^7, d(e^{I'} ^ e^7) = (-1)^{|I'|} e^{I'} ^ omega
                rest = Form({tuple(i for i in idx if i != REEB): c})
                s = (-1) ** (len(idx) - 1)
                out = out + wedge(rest, om) * s
        return out
    return matrix_of(fn, k, k + 1)


@lru_cache(maxsize=None)
def wedge_tensor(k1: int, k2: int) -> np.ndarray:
    """T[K, I, J] with e^I ^ e^J = sum_K T[K, I, J] e^K."""
    m1, m2, m3 = basis_masks(k1), basis_masks(k2), basis_masks(k1 + k2)
    pos = {m: n for n, m in enumerate(m3)}
    t = np.zeros((len(m3), len(m1), len(m2)))
    for a, ma in enumerate(m1):
        for b, mb in enumerate(m2):
            f = wedge(Form({ma: 1}), Form({mb: 1}))
            for m, c in f.items():
                t[pos[m], a, b] = float(c)
    return t


@lru_cache(maxsize=None)
def star_matrix(k: int) -> np.ndarray:
    return matrix_of(hodge_star, k, 7 - k)


@lru_cache(maxsize=None)
def horizontal_index(k: int) -> np.ndarray:
    """Positions of horizontal blades (no e^7) among the grade-k blades."""
    return np.array([n for n, m in enumerate(basis_masks(k)) if not m & (1 << (REEB - 1))], dtype=int)


@lru_cache(maxsize=None)
def vertical_index(k: int) -> np.ndarray:
    return np.array([n for n, m in enumerate(basis_masks(k)) if m & (1 << (REEB - 1))], dtype=int)


@lru_cache(maxsize=None)
def transverse_star_matrix(k: int) -> np.ndarray:
    """*_T on horizontal blades, as a map Lambda^k -> Lambda^{6-k} (full blade coordinates)."""
    out = np.zeros((nb(6 - k), nb(k)))
    hk = horizontal_index(k)
    for col in hk:
        f = Form({basis_masks(k)[col]: 1})
        img = _tstar_form(f)
        for m, c in img.items():
            out[basis_masks(6 - k).index(m), col] = float(c)
    return out


@lru_cache(maxsize=None)
def omega_matrix(k: int) -> np.ndarray:
    om = structure_forms().omega
    return matrix_of(lambda f: wedge(om, f), k, k + 2)


@lru_cache(maxsize=None)
def eta_matrix(k: int) -> np.ndarray:
    return ext_mult(REEB, k)


@lru_cache(maxsize=None)
def p61_projector() -> np.ndarray:
    """Orthogonal projector of Lambda^2 onto Omega^2_6 + Omega^2_1 (horizontal)."""
    f6, f1, _ = horizontal_two_form_frames()
    q = np.vstack([f6, f1])
    return q.T @ q


@lru_cache(maxsize=None)
def p8_projector() -> np.ndarray:
    _, _, f8 = horizontal_two_form_frames()
    return f8.T @ f8


@lru_cache(maxsize=None)
def l_sigma_matrix() -> np.ndarray:
    sig = structure_forms().sigma
    return matrix_of(lambda f: hodge_star(wedge(sig, f)), 2, 2)


@lru_cache(maxsize=None)
def l_star_sigma_matrix() -> np.ndarray:
    ss = hodge_star(structure_forms().sigma)
    return matrix_of(lambda f: wedge(f, ss), 2, 6)


def apply_fiber(mat: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Apply a blade-space matrix to field data of shape (nb, dg, *grid)."""
    return np.tensordot(mat, data, axes=(1, 0))


# -- grid ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    n: int
    mode: str = "spectral"

    def __post_init__(self):
        if not 2 <= self.n <= 8:
            raise ValueError("grid size must be in 2..8")
        if self.mode not in ("spectral", "central"):
            raise ValueError("mode must be 'spectral' or 'central'")

    @property
    def shape(self) -> tuple:
        return (self.n,) * AXES

    @property
    def points(self) -> int:
        return self.n ** AXES

    @property
    def cell_volume(self) -> float:
        return 1.0 / self.points

    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    def symbol_1d(self) -> np.ndarray:
        """Fourier symbol of d/dx on one axis (period 1)."""
        k = self.wavenumbers()
        if self.mode == "spectral":
            s = 2j * np.pi * k
            if self.n % 2 == 0:
                s[self.n // 2] = 0.0
            return s
        return 1j * self.n * np.sin(2 * np.pi * k / self.n)

    def derivative(self, data: np.ndarray, axis: int) -> np.ndarray:
        """d/dx_{axis+1} of data whose last six axes are the grid."""
        ax = data.ndim - AXES + axis
        if self.mode == "central":
            h = 1.0 / self.n
            return (np.roll(data, -1, axis=ax) - np.roll(data, 1, axis=ax)) / (2 * h)
        sym = self.symbol_1d()
        shape = [1] * data.ndim
        shape[ax] = self.n
        out = np.fft.ifft(np.fft.fft(data, axis=ax) * sym.reshape(shape), axis=ax)
        return out.real if np.isrealobj(data) else out

    def mode_symbols(self):
        """Iterator-free table: array (N^6, 6) of per-axis symbols for every Fourier mode."""
        s = self.symbol_1d()
        grids = np.meshgrid(*([s] * AXES), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def mode_wavenumbers(self):
        k = self.wavenumbers()
        grids = np.meshgrid(*([k] * AXES), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)


# -- fields -------------------------------------------------------------------------

@dataclass
class GridField:
    grid: Grid
    algebra: LieAlgebra
    grade: int
    data: np.ndarray

    def __post_init__(self):
        want = (nb(self.grade), self.algebra.dim) + self.grid.shape
        if self.data.shape != want:
            raise ValueError(f"field data has shape {self.data.shape}, expected {want}")

    @classmethod
    def zeros(cls, grid: Grid, algebra: LieAlgebra, grade: int, dtype=float) -> GridField:
        return cls(grid, algebra, grade, np.zeros((nb(grade), algebra.dim) + grid.shape, dtype=dtype))

    @classmethod
    def constant(cls, grid: Grid, algebra: LieAlgebra, lie_form) -> GridField:
        """Constant field from a LieForm of a single grade."""
        (k,) = lie_form.grades() or {0}
        out = cls.zeros(grid, algebra, k)
        pos = {m: n for n, m in enumerate(basis_masks(k))}
        for m, vec in lie_form.items():
            out.data[pos[m]] += np.array([float(c) for c in vec])[:, None, None, None, None, None, None]
        return out

    def like(self, data: np.ndarray, grade: int | None = None) -> GridField:
        return GridField(self.grid, self.algebra, self.grade if grade is None else grade, data)

    def _check(self, other: GridField):
        if other.grid != self.grid:
            raise GridMismatch("fields live on different grids")
        if other.algebra is not self.algebra:
            raise GridMismatch("fields have different Lie algebras")

    def __add__(self, other):
        self._check(other)
        if other.grade != self.grade:
            raise ValueError("grade mismatch")
        return self.like(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        if other.grade != self.grade:
            raise ValueError("grade mismatch")
        return self.like(self.data - other.data)

    def __neg__(self):
        return self.like(-self.data)

    def __mul__(self, s):
        return self.like(self.data * s)

    __rmul__ = __mul__

    def horizontal(self) -> GridField:
        out = np.zeros_like(self.data)
        h = horizontal_index(self.grade)
        out[h] = self.data[h]
        return self.like(out)

    def vertical(self) -> GridField:
        return self - self.horizontal()

    def is_horizontal(self, tol: float = 0.0) -> bool:
        v = vertical_index(self.grade)
        return not len(v) or float(np.abs(self.data[v]).max()) <= tol

    def fiber(self, mat: np.ndarray, grade: int) -> GridField:
        return self.like(apply_fiber(mat, self.data), grade)

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product(self, self).real, 0.0)))

    def at(self, point) -> np.ndarray:
        return self.data[(slice(None), slice(None)) + tuple(point)]


@dataclass
class Connection:
    """A = a_h + a_eta eta, stored as one grade-1 field."""
    field: GridField

    @classmethod
    def zero(cls, grid: Grid, algebra: LieAlgebra) -> Connection:
        return cls(GridField.zeros(grid, algebra, 1))

    @classmethod
    def from_parts(cls, a_h: GridField, a_eta: GridField) -> Connection:
        a_h._check(a_eta)
        data = a_h.horizontal().data.copy()
        data[nb(1) - 1] += a_eta.data[0]
        return cls(a_h.like(data, 1))

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def algebra(self) -> LieAlgebra:
        return self.field.algebra

    @property
    def a_h(self) -> GridField:
        return self.field.horizontal()

    @property
    def a_eta(self) -> GridField:
        return GridField(self.grid, self.algebra, 0, self.field.data[nb(1) - 1:nb(1)].copy())

    def __add__(self, alpha: GridField) -> Connection:
        return Connection(self.field + alpha)

    def is_constant(self, tol: float = 1e-14) -> bool:
        d = self.field.data
        return float(np.abs(d - d.reshape(d.shape[:2] + (-1,)).mean(axis=2)[(...,) + (None,) * AXES]).max()) <= tol

    def constant_value(self) -> np.ndarray:
        d = self.field.data
        return d.reshape(d.shape[:2] + (-1,)).mean(axis=2)


# -- pointwise algebra --------------------------------------------------------------

def bracket(a: GridField, b: GridField) -> GridField:
    """Pointwise [a ^ b]."""
    a._check(b)
    k = a.grade + b.grade
    if k > 7:
        return GridField.zeros(a.grid, a.algebra, 0) * 0
    t = wedge_tensor(a.grade, b.grade)
    f = a.algebra.float_structure()
    # [a^b]_{K c} = T[K,I,J] f[p,q,c] a[I,p] b[J,q]
    ab = np.einsum("Ip...,Jq...->IJpq...", a.data, b.data)
    tmp = np.tensordot(t, ab, axes=([1, 2], [0, 1]))          # K p q ...
    out = np.tensordot(f, tmp, axes=([0, 1], [1, 2]))          # c K ...
    return a.like(np.moveaxis(out, 0, 1), k)


def bracket_const_matrix(algebra: LieAlgebra, a_const: np.ndarray, k_a: int, k_in: int) -> np.ndarray:
    """Matrix of x -> [a ^ x] for a constant a, on (blade, lie) flattened coordinates."""
    t = wedge_tensor(k_a, k_in)
    f = algebra.float_structure()
    m = np.einsum("KIJ,pqc,Ip->KcJq", t, f, a_const)
    n_out, dg, n_in, _ = m.shape
    return m.reshape(n_out * dg, n_in * dg)


def bracket_adjoint(a: GridField, y: GridField, k_in: int) -> GridField:
    """Adjoint of x -> [a ^ x] (x of grade k_in) applied to y, for a scalar Lie metric."""
    _require_scalar_metric(a.algebra)
    t = wedge_tensor(a.grade, k_in)
    f = a.algebra.float_structure()
    # x_{J q} = sum T[K,I,J] f[p,q,c] a[I,p] y[K,c]
    ay = np.einsum("Ip...,Kc...->IKpc...", a.data, y.data)
    tmp = np.tensordot(t, ay, axes=([1, 0], [0, 1]))          # J p c ...
    out = np.tensordot(f, tmp, axes=([0, 2], [1, 2]))          # q J ...
    return a.like(np.moveaxis(out, 0, 1), k_in)


def _require_scalar_metric(algebra: LieAlgebra):
    g = algebra.float_metric()
    if not np.allclose(g, g[0, 0] * np.eye(len(g))):
        raise NotImplementedError("adjoints assume a scalar multiple of the identity as Lie metric")


def trace_pair_field(a: GridField, b: GridField) -> np.ndarray:
    """Pointwise scalar form <a ^ b>, shape (nb(ka+kb), *grid)."""
    t = wedge_tensor(a.grade, b.grade)
    g = a.algebra.float_metric()
    ab = np.einsum("Ip...,pq,Jq...->IJ...", a.data, g, b.data)
    return np.tensordot(t, ab, axes=([1, 2], [0, 1]))


def wedge_scalar(mat_form: Form, f: GridField) -> GridField:
    """Constant scalar form ^ field."""
    k = mat_form.grade
    m = matrix_of(lambda x: wedge(mat_form, x), f.grade, f.grade + k)
    return f.fiber(m, f.grade + k)


# -- derivatives ----------------------------------------------------------------------

def ext_d(f: GridField) -> GridField:
    k = f.grade
    if k >= 7:
        return GridField.zeros(f.grid, f.algebra, 7) * 0.0
    out = apply_fiber(structure_d(k), f.data)
    for i in range(AXES):
        out = out + apply_fiber(ext_mult(i + 1, k), f.grid.derivative(f.data, i))
    return f.like(out, k + 1)


def ext_d_adjoint(y: GridField) -> GridField:
    """Adjoint of ext_d w.r.t. inner_product; y has grade k+1."""
    k = y.grade - 1
    out = apply_fiber(structure_d(k).T, y.data)
    for i in range(AXES):
        # spectral and central derivatives are skew-adjoint
        out = out - y.grid.derivative(apply_fiber(ext_mult(i + 1, k).T, y.data), i)
    return y.like(out, k)


def cov_d(A: Connection, f: GridField) -> GridField:
    A.field._check(f)
    out = ext_d(f)
    if f.grade + 1 <= 7:
        out = out + bracket(A.field, f)
    return out


def cov_d_adjoint(A: Connection, y: GridField) -> GridField:
    return ext_d_adjoint(y) + bracket_adjoint(A.field, y, y.grade - 1)


def curvature(A: Connection) -> GridField:
    return ext_d(A.field) + bracket(A.field, A.field) * 0.5


def D_T_and_D_V(A: Connection, f: GridField):
    """D_V = i_xi d_A and D_T = d_A - eta ^ D_V on horizontal fields."""
    if not f.is_horizontal():
        raise ValueError("D_T/D_V act on horizontal fields")
    da = cov_d(A, f)
    dv = f.like(apply_fiber(interior(REEB, f.grade + 1), da.data), f.grade)
    dt = da - dv.fiber(eta_matrix(f.grade), f.grade + 1)
    return dt, dv


def D_T(A, f):
    return D_T_and_D_V(A, f)[0]


def D_V(A, f):
    return D_T_and_D_V(A, f)[1]


def D_T_adjoint(A: Connection, y: GridField) -> GridField:
    """Adjoint of D_T (horizontal k -> horizontal k+1), as the horizontal part of d_A^*."""
    return cov_d_adjoint(A, y.horizontal()).horizontal()


def D_V_adjoint(A: Connection, y: GridField) -> GridField:
    # D_V = [a_eta, .] pointwise
    a_eta = A.a_eta
    return bracket_adjoint(a_eta, y.horizontal(), y.grade)


# -- inner products and stars -------------------------------------------------------------

def inner_product(a: GridField, b: GridField) -> complex | float:
    a._check(b)
    if a.grade != b.grade:
        raise ValueError("inner_product needs equal grades")
    g = a.algebra.float_metric()
    gb = np.tensordot(g, b.data, axes=(1, 1))              # q I ...
    val = np.vdot(np.moveaxis(a.data, 1, 0), gb) / a.grid.points
    return float(val.real) if np.isrealobj(a.data) and np.isrealobj(b.data) else complex(val)


def star(f: GridField) -> GridField:
    return f.fiber(star_matrix(f.grade), 7 - f.grade)


def transverse_star(f: GridField) -> GridField:
    if not f.is_horizontal(1e-14):
        raise ValueError("transverse star needs a horizontal field")
    return f.fiber(transverse_star_matrix(f.grade), 6 - f.grade)


def L_omega(f: GridField) -> GridField:
    return f.fiber(omega_matrix(f.grade), f.grade + 2)


def Lambda(f: GridField) -> GridField:
    """Adjoint of L_omega (pointwise transpose)."""
    return f.fiber(omega_matrix(f.grade - 2).T, f.grade - 2)


def Lambda_stated(f: GridField) -> GridField:
    """-*_T L_omega *_T on horizontal fields."""
    return -transverse_star(L_omega(transverse_star(f)))


def d7(A: Connection, alpha: GridField) -> GridField:
    """p(d_A alpha): horizontal Omega^2_6 + Omega^2_1 part."""
    return cov_d(A, alpha).fiber(p61_projector(), 2)


def d7_adjoint(A: Connection, y: GridField) -> GridField:
    return cov_d_adjoint(A, y.fiber(p61_projector(), 2))


def d7_extended(A: Connection, alpha: GridField) -> GridField:
    """L_{*sigma} d_A : Omega^1 -> Omega^6."""
    return cov_d(A, alpha).fiber(l_star_sigma_matrix(), 6)


def d7_extended_adjoint(A: Connection, y: GridField) -> GridField:
    return cov_d_adjoint(A, y.fiber(l_star_sigma_matrix().T, 2))


def d7_extended_stated_adjoint(A: Connection, y: GridField) -> GridField:
    """* d7 * on Omega^6."""
    return star(d7_extended(A, star(y)))


@lru_cache(maxsize=None)
def t_map_matrix() -> np.ndarray:
    """Omega^2_V -> Omega^2_6 with T(e^{i7}) from the stated table, plus identity on omega."""
    from .sasaki_ops import eigen_basis
    from .exterior_core import coordinates
    v = eigen_basis().v
    table = {1: v[4], 2: v[2], 3: v[0], 4: v[5], 5: v[3], 6: v[1]}
    m = np.zeros((nb(2), nb(2)))
    for i, img in table.items():
        col = basis_masks(2).index(e(i, 7).items().__iter__().__next__()[0])
        m[:, col] = -np.array([float(c) for c in coordinates(img, 2)])
    f6, f1, _ = horizontal_two_form_frames()
    m += f1.T @ f1
    return m


def d7_route(A: Connection, alpha: GridField) -> GridField:
    """(T + 1) L_{*sigma}^{-1} L_{*sigma} d_A alpha, restricted to Omega^2_1 + Omega^2_V."""
    lss = l_star_sigma_matrix()
    six = cov_d(A, alpha).fiber(lss, 6)
    inv = np.linalg.pinv(lss)          # inverse on Omega^2_1 + Omega^2_V
    pre = six.fiber(inv, 2)
    return pre.fiber(t_map_matrix(), 2)


def _rel(x: GridField, scale: float) -> float:
    return x.norm() / max(scale, 1e-300)


def curvature_identity_residuals(A: Connection, f: GridField) -> dict:
    """d_A d_A f against [F ^ f] and [f ^ F], relative to ||f||."""
    F = curvature(A)
    dd = cov_d(A, cov_d(A, f))
    return {"F_wedge_f": _rel(dd - bracket(F, f), f.norm()),
            "f_wedge_F": _rel(dd - bracket(f, F), f.norm())}


def transverse_identity_residuals(A: Connection, f: GridField) -> dict:
    """D_T^2 f = -omega ^ D_V f and D_T D_V f = D_V D_T f on a horizontal 0-form f.

    The ``_stated`` residuals are the bare identities; the ``_corrected`` ones add the
    curvature terms from d_A^2 f = [F ^ f]: D_T^2 f + omega ^ D_V f = [F_H, f] and
    D_V D_T f - D_T D_V f = [i_xi F, f].
    """
    if f.grade != 0:
        raise ValueError("transverse identities are checked on 0-forms")
    F = curvature(A)
    dt, dv = D_T_and_D_V(A, f)
    dtt = D_T(A, dt)
    sq = dtt + L_omega(dv)
    comm = D_V(A, dt) - D_T(A, dv)
    FH = F.horizontal()
    iF = F.like(apply_fiber(interior(REEB, 2), F.data), 1)
    n = f.norm()
    return {"square_stated": _rel(sq, n),
            "square_corrected": _rel(sq - bracket(FH, f), n),
            "commute_stated": _rel(comm, n),
            "commute_corrected": _rel(comm - bracket(iF, f), n)}


# -- adjoint registry ----------------------------------------------------------------------

def operator(tag: str, A: Connection):
    """(forward, adjoint, input grade or None) for a named operator."""
    table = {
        "d_A": (lambda f: cov_d(A, f), lambda y: cov_d_adjoint(A, y)),
        "D_T": (lambda f: D_T(A, f), lambda y: D_T_adjoint(A, y)),
        "D_V": (lambda f: D_V(A, f), lambda y: D_V_adjoint(A, y)),
        "d7": (lambda f: d7_extended(A, f), lambda y: d7_extended_adjoint(A, y)),
        "d7_projected": (lambda f: d7(A, f), lambda y: d7_adjoint(A, y)),
        "L_omega": (L_omega, Lambda),
    }
    if tag not in table:
        raise KeyError(f"unknown operator tag {tag!r}")
    return table[tag]


def adjoint(tag: str, A: Connection):
    return operator(tag, A)[1]


# -- random fields -----------------------------------------------------------------------

def random_field(rng, grid: Grid, algebra: LieAlgebra, grade: int, kmax: int | None = 1,
                 horizontal: bool = False, amplitude: float = 1.0, complex_: bool = False) -> GridField:
    """Random field with Fourier support |k_j| <= kmax on each axis (all modes if None)."""
    shape = (nb(grade), algebra.dim) + grid.shape
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if kmax is not None:
        k = np.abs(grid.wavenumbers())
        mask1 = (k <= kmax).astype(float)
        if grid.n % 2 == 0:
            mask1[grid.n // 2] = 0.0
        mask = mask1
        for _ in range(AXES - 1):
            mask = np.multiply.outer(mask, mask1)
        z = z * mask
    data = np.fft.ifftn(z, axes=tuple(range(2, 2 + AXES))) * np.sqrt(grid.points)
    if not complex_:
        data = data.real
    f = GridField(grid, algebra, grade, data)
    if horizontal:
        f = f.horizontal()
    scale = amplitude / max(f.norm(), 1e-300)
    return f * scale


def random_connection(rng, grid: Grid, algebra: LieAlgebra, kmax: int | None = 1,
                      amplitude: float = 1.0) -> Connection:
    return Connection(random_field(rng, grid, algebra, 1, kmax, amplitude=amplitude))


# -- Fourier-block assembly for constant connections ---------------------------------------

@lru_cache(maxsize=None)
def fiber_frame(name: str) -> np.ndarray:
    """Orthonormal frames (rows) for named fiber subspaces in blade coordinates."""
    if name.startswith("L"):
        k = int(name[1:])
        return quotient_frame(k)
    if name.startswith("H"):
        k = int(name[1:])
        idx = horizontal_index(k)
        out = np.zeros((len(idx), nb(k)))
        out[np.arange(len(idx)), idx] = 1.0
        return out
    if name.startswith("F"):
        k = int(name[1:])
        return np.eye(nb(k))
    if name == "B2":
        f6, f1, _ = horizontal_two_form_frames()
        return np.vstack([f6, f1])
    raise KeyError(name)


FRAME_GRADE = {"B2": 2}


def frame_grade(name: str) -> int:
    return FRAME_GRADE.get(name, int(name[1:]) if name[1:].isdigit() else 0)


def _kron_lie(mat: np.ndarray, dg: int) -> np.ndarray:
    return np.kron(mat, np.eye(dg))


def mode_matrix_cov_d(algebra: LieAlgebra, a_const: np.ndarray, k: int, symbols: np.ndarray,
                      frame_in: np.ndarray, frame_out: np.ndarray, project_out: np.ndarray | None = None):
    """Per-mode matrices of q_out (d_A) q_in^T for a constant connection.

    Returns an array (n_modes, m_out*dg, m_in*dg).
    """
    dg = algebra.dim
    base = structure_d(k).astype(complex)
    base = _kron_lie(base, dg) + bracket_const_matrix(algebra, a_const, 1, k)
    dirs = [_kron_lie(ext_mult(i + 1, k), dg) for i in range(AXES)]
    qin = _kron_lie(frame_in, dg)
    post = frame_out if project_out is None else frame_out @ project_out
    qout = _kron_lie(post, dg)
    b0 = qout @ base @ qin.T
    bd = np.stack([qout @ d @ qin.T for d in dirs])          # 6, m_out, m_in
    return b0[None] + np.tensordot(symbols, bd, axes=(1, 0))


def to_modes(f: GridField, frame: np.ndarray) -> np.ndarray:
    """Field -> per-mode coefficient vectors in a fiber frame: (n_modes, m*dg), unitary FFT."""
    c = apply_fiber(frame, f.data)
    c = np.fft.fftn(c, axes=tuple(range(2, 2 + AXES))) / np.sqrt(f.grid.points)
    m, dg = c.shape[:2]
    return c.reshape(m * dg, -1).T


def from_modes(v: np.ndarray, grid: Grid, algebra: LieAlgebra, frame: np.ndarray, grade: int,
               real: bool = True) -> GridField:
    dg = algebra.dim
    m = frame.shape[0]
    c = v.T.reshape((m, dg) + grid.shape)
    c = np.fft.ifftn(c, axes=tuple(range(2, 2 + AXES))) * np.sqrt(grid.points)
    data = apply_fiber(frame.T, c)
    if real:
        data = data.real
    return GridField(grid, algebra, grade, data)


def assemble(op, grid: Grid, algebra: LieAlgebra, k_in: int, frame_in: np.ndarray,
             frame_out: np.ndarray, k_out: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dense real matrix of a matrix-free operator between framed real fields.

    Columns are indexed by (frame component, lie component, grid point).
    """
    n_in = frame_in.shape[0] * algebra.dim * grid.points
    n_out = frame_out.shape[0] * algebra.dim * grid.points
    if n_in * n_out > cap:
        raise SizeCapExceeded(f"dense matrix {n_out}x{n_in} exceeds cap {cap}")
    mat = np.zeros((n_out, n_in))
    basis = np.zeros((frame_in.shape[0], algebra.dim) + grid.shape)
    flat = basis.reshape(-1)
    for j in range(n_in):
        flat[:] = 0.0
        flat[j] = 1.0
        f = GridField(grid, algebra, k_in, apply_fiber(frame_in.T, basis))
        y = op(f)
        mat[:, j] = apply_fiber(frame_out, y.data).reshape(-1)
    return mat


def framed(f: GridField, frame: np.ndarray) -> np.ndarray:
    return apply_fiber(frame, f.data).reshape(-1)


def unframed(v: np.ndarray, grid: Grid, algebra: LieAlgebra, frame: np.ndarray, grade: int) -> GridField:
    c = v.reshape((frame.shape[0], algebra.dim) + grid.shape)
    return GridField(grid, algebra, grade, apply_fiber(frame.T, c))


# -- Kahler identities on the basic complex (A = 0, scalar complex fields) ---------------------

@lru_cache(maxsize=None)
def _horizontal_blocks():
    """Per-degree horizontal data: type projectors, e^i ^ . and omega ^ . as complex matrices."""
    hm = {k: [m for m in basis_masks(k) if not m & (1 << (REEB - 1))] for k in range(7)}
    pos = {k: {m: n for n, m in enumerate(hm[k])} for k in hm}

    def mat(fn, k, k_out):
        out = np.zeros((len(hm[k_out]), len(hm[k])), complex)
        for col, m in enumerate(hm[k]):
            for mm, c in fn(Form({m: 1})).items():
                out[pos[k_out][mm], col] += complex(c)
        return out

    proj = {}
    for k in range(7):
        for col, m in enumerate(hm[k]):
            for (p, q), part in _type_split(Form({m: 1})).items():
                pr = proj.setdefault((p, q), np.zeros((len(hm[k]),) * 2, complex))
                for mm, c in part.items():
                    pr[pos[k][mm], col] += complex(c)
    wedges = {k: np.stack([mat(lambda f, i=i: wedge(e(i), f), k, k + 1) for i in range(1, 7)])
              for k in range(6)}
    om = structure_forms().omega
    lw = {k: mat(lambda f: wedge(om, f), k, k + 2) for k in range(5)}
    return {k: len(hm[k]) for k in hm}, proj, wedges, lw


def kahler_identity_residuals(grid: Grid, n_fields: int = 100, seed: int = 0) -> dict:
    """Residual norms of the Sasakian Kahler identities on random basic complex fields.

    Keys ending in ``_stated`` use the signs [Lambda, d'] = -i dbar'^*, [Lambda, dbar'] = i d'^*;
    ``_corrected`` use the opposite signs.  Each value is max ||R f|| / ||f|| over the
    fields.  All operators are Fourier-diagonal, so they are applied per mode and per degree.
    """
    dims, proj, wedges, lw = _horizontal_blocks()
    sym = grid.mode_symbols()
    nm = sym.shape[0]

    def adj(m):
        return np.conj(np.swapaxes(m, -1, -2))

    def zero(a, b):
        return np.zeros((nm, dims[a] if 0 <= a <= 6 else 0, dims[b] if 0 <= b <= 6 else 0), complex)

    d, dl, dlb = {}, {}, {}
    for k in range(6):
        d[k] = np.tensordot(sym, wedges[k], axes=(1, 0))          # modes, n_{k+1}, n_k
        dl[k] = np.zeros_like(d[k])
        dlb[k] = np.zeros_like(d[k])
        for p in range(k + 1):
            q = k - p
            if (p + 1, q) in proj:
                dl[k] += proj[(p + 1, q)] @ d[k] @ proj[(p, q)]
            if (p, q + 1) in proj:
                dlb[k] += proj[(p, q + 1)] @ d[k] @ proj[(p, q)]

    def get(table, k, a, b):
        return table[k] if k in table else zero(a, b)

    def up(table, k):                          # degree k -> k+1
        return get(table, k, k + 1, k)

    def down(table, k):                        # adjoint, degree k -> k-1
        return adj(get(table, k - 1, k, k - 1))

    def lam(k):                                # degree k -> k-2
        return adj(lw[k - 2])[None] if k - 2 in lw else zero(k - 2, k)

    def lap(table, k):
        return down(table, k + 1) @ up(table, k) + up(table, k - 1) @ down(table, k)

    rng = np.random.default_rng(seed)
    sums = {}
    total = np.zeros(n_fields)
    for k in range(7):
        ops = {
            "i_stated": lam(k + 1) @ up(dl, k) - up(dl, k - 2) @ lam(k) + 1j * down(dlb, k),
            "ii_stated": lam(k + 1) @ up(dlb, k) - up(dlb, k - 2) @ lam(k) - 1j * down(dl, k),
            "i_corrected": lam(k + 1) @ up(dl, k) - up(dl, k - 2) @ lam(k) - 1j * down(dlb, k),
            "ii_corrected": lam(k + 1) @ up(dlb, k) - up(dlb, k - 2) @ lam(k) + 1j * down(dl, k),
            "iii": up(dl, k - 1) @ down(dlb, k) + down(dlb, k + 1) @ up(dl, k),
            "iv": lap(d, k) - 2 * lap(dlb, k),
            "v": lap(dl, k) - lap(dlb, k),
        }
        shape = (nm, dims[k], n_fields)
        f = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        total += np.sum(np.abs(f) ** 2, axis=(0, 1))
        for key, m in ops.items():
            if m.shape[1] == 0:
                continue
            sums[key] = sums.get(key, 0.0) + np.sum(np.abs(m @ f) ** 2, axis=(0, 1))
    out = {key: float(np.sqrt(v / total).max()) for key, v in sums.items()}
    out["n_fields"] = n_fields
    return out


def lambda_formula_residuals(grid: Grid, algebra: LieAlgebra, seed: int = 0) -> dict:
    """Per input degree: ||Lambda f - (-*_T L_omega *_T) f|| / ||f|| and with the opposite sign."""
    rng = np.random.default_rng(seed)
    out = {}
    for k in range(2, 7):
        f = random_field(rng, grid, algebra, k, horizontal=True)
        a, b = Lambda(f), Lambda_stated(f)
        out[k] = {"stated": (a - b).norm() / f.norm(), "negated": (a + b).norm() / f.norm()}
    return out


# -- snapshots --------------------------------------------------------------------------

def field_to_json(f: GridField) -> dict:
    return {
        "format": "contactgauge.gridfield/1",
        "grade": f.grade,
        "n": f.grid.n,
        "mode": f.grid.mode,
        "algebra": f.algebra.name,
        "blades": ["".join(map(str, mask_indices(m))) for m in basis_masks(f.grade)],
        "shape": list(f.data.shape),
        "data": np.asarray(f.data, dtype=float).reshape(-1).tolist(),
    }


def field_from_json(obj: dict) -> GridField:
    grid = Grid(obj["n"], obj.get("mode", "spectral"))
    alg = algebra_by_name(obj["algebra"])
    data = np.array(obj["data"], dtype=float).reshape(obj["shape"])
    return GridField(grid, alg, obj["grade"], data)


def save_field(f: GridField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_json(f), fh)


def load_field(path) -> GridField:
    with open(path) as fh:
        return field_from_json(json.load(fh))
