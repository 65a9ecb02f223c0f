"""Contact/Sasakian operators on the Darboux coframe model.

Structure forms, horizontal/vertical projections, the eigenspace split of
L_sigma = *(sigma ^ .), the transverse star, complex types and the SU(3)
split of horizontal 3-forms.  Everything works on exact forms; float forms
are accepted wherever the operation is linear.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .exterior_core import (
    REEB, Form, I, contract, e, hodge_star, inner, mask_indices,
    scalar, wedge,
)

HALF = Fraction(1, 2)
ETA_BIT = 1 << (REEB - 1)


@dataclass(frozen=True)
class StructureForms:
    eta: Form
    omega: Form
    sigma: Form
    epsilon: Form
    theta_plus: Form
    theta_minus: Form
    phi: Form
    psi: Form
    dz: tuple
    dzbar: tuple


@dataclass(frozen=True)
class EigenBasis:
    v: tuple
    w: tuple


@dataclass(frozen=True)
class TwoFormSplit:
    p1: Form
    p6: Form
    p8: Form
    pv: Form

    def parts(self):
        return (self.p1, self.p6, self.p8, self.pv)


@dataclass(frozen=True)
class Lambda3Split:
    re: Form
    im: Form
    six: Form
    twelve: Form

    def parts(self):
        return (self.re, self.im, self.six, self.twelve)


@dataclass
class InstantonReport:
    sdci: bool
    asdci: bool
    hym: bool
    g2: bool
    residuals: dict = field(default_factory=dict)


@lru_cache(maxsize=None)
def structure_forms() -> StructureForms:
    eta = e(7)
    omega = e(1, 4) + e(2, 5) + e(3, 6)
    sigma = eta ^ omega
    dz = tuple(e(j) + I * e(j + 3) for j in (1, 2, 3))
    dzbar = tuple(f.conj() for f in dz)
    eps = dz[0] ^ dz[1] ^ dz[2]
    tp, tm = eps.real(), eps.imag()
    phi = sigma + tm
    psi = (omega ^ omega) * HALF + (eta ^ tp)
    return StructureForms(eta, omega, sigma, eps, tp, tm, phi, psi, dz, dzbar)


@lru_cache(maxsize=None)
def eigen_basis() -> EigenBasis:
    v = (e(1, 2) - e(4, 5), e(1, 5) - e(2, 4), e(1, 3) - e(4, 6),
         e(1, 6) - e(3, 4), e(2, 3) - e(5, 6), e(2, 6) - e(3, 5))
    w = (e(1, 2) + e(4, 5), e(1, 5) + e(2, 4), e(1, 3) + e(4, 6),
         e(1, 6) + e(3, 4), e(2, 3) + e(5, 6), e(2, 6) + e(3, 5),
         e(1, 4) - e(3, 6), e(2, 5) - e(3, 6))
    return EigenBasis(v, w)


def _like(f: Form, a: Form) -> Form:
    """Convert an exact constant form to the tower of ``a``."""
    return f.to_float() if a.tower == "R" else f


def _require_grade(a: Form, k: int, what: str):
    if a and a.grades() != {k}:
        raise ValueError(f"{what} expects a grade-{k} form, got grades {sorted(a.grades())}")


# -- projections -----------------------------------------------------------------

def project_T(a: Form) -> Form:
    """Vertical projection T = eta ^ i_xi."""
    return wedge(_like(e(REEB), a), contract(REEB, a))


def split_HV(a: Form):
    v = project_T(a)
    return a - v, v


def is_horizontal(a: Form) -> bool:
    return all(not m & ETA_BIT for m, _ in a.items())


def L_sigma(a: Form) -> Form:
    _require_grade(a, 2, "L_sigma")
    return hodge_star(wedge(_like(structure_forms().sigma, a), a))


def eigen_split(a: Form) -> TwoFormSplit:
    _require_grade(a, 2, "eigen_split")
    h, vert = split_HV(a)
    om = _like(structure_forms().omega, a)
    p1 = om * (inner(h, om) / 3 if a.tower != "R" else inner(h, om) / 3.0)
    p6 = Form()
    for v in eigen_basis().v:
        v = _like(v, a)
        c = inner(h, v)
        if c != 0:
            p6 = p6 + v * (c / 2 if a.tower != "R" else c / 2.0)
    p8 = h - p1 - p6
    return TwoFormSplit(p1, p6, p8, vert)


def L_star_sigma(a: Form) -> Form:
    _require_grade(a, 2, "L_star_sigma")
    return wedge(a, hodge_star(_like(structure_forms().sigma, a)))


def L_epsilon(a: Form) -> Form:
    _require_grade(a, 2, "L_epsilon")
    return hodge_star(wedge(a, _like(structure_forms().theta_minus, a)))


def transverse_star(a: Form) -> Form:
    """*_T b = (-1)^(6-k) *(b ^ eta) on horizontal forms, per grade."""
    if not is_horizontal(a):
        raise ValueError("transverse_star expects a horizontal form")
    eta = _like(e(REEB), a)
    out = Form()
    for k in sorted(a.grades()):
        s = hodge_star(wedge(a.part(k), eta))
        out = out + (s if (6 - k) % 2 == 0 else -s)
    return out


def J(a: Form) -> Form:
    """Transverse complex structure on horizontal 1-forms: e^j -> -e^{j+3}, e^{j+3} -> e^j.

    This is the sign for which *_T b = 1/2 J b ^ omega^2.
    """
    _require_grade(a, 1, "J")
    if not is_horizontal(a):
        raise ValueError("J acts on horizontal 1-forms")
    out = {}
    for m, c in a.items():
        (i,) = mask_indices(m)
        if i <= 3:
            out[(i + 3,)] = -c
        else:
            out[(i - 3,)] = c
    return Form(out)


def J_derivation(a: Form) -> Form:
    """Extension of J to horizontal forms as a derivation."""
    out = Form()
    for m, c in a.items():
        idx = mask_indices(m)
        for n, i in enumerate(idx):
            img = J(e(i))
            rest_l = e(*idx[:n]) if n else scalar(1)
            rest_r = e(*idx[n + 1:]) if n + 1 < len(idx) else scalar(1)
            out = out + _like(rest_l ^ img ^ rest_r, a) * c
    return out


def _type_split(h: Form) -> dict:
    """Split a horizontal form by J-weight: J dz = i dz, J dzbar = -i dzbar."""
    out = {}
    unit = 1j if h.tower == "R" else I
    for d in sorted(h.grades()):
        hd = h.part(d)
        weights = list(range(-d, d + 1, 2))  # p - q
        # eigenvalue of J_derivation on (p,q) is i(p - q)
        for wgt in weights:
            proj = hd
            for other in weights:
                if other == wgt:
                    continue
                # (J - i*other)/(i*wgt - i*other)
                num = J_derivation(proj) - proj * (unit * other)
                proj = num * (1 / (unit * (wgt - other)))
            if proj:
                p = (d + wgt) // 2
                out[(p, d - p)] = proj
    return out


def pq_decompose(a: Form) -> dict:
    """Bidegree decomposition.

    Horizontal parts are keyed ``(p, q)``; parts of the form eta ^ b with b of
    type (p, q) are keyed ``("eta", p, q)``.  The parts sum to ``a``.
    """
    h, v = split_HV(a)
    out = _type_split(h)
    eta = _like(e(REEB), a)
    for (p, q), part in _type_split(contract(REEB, v)).items():
        out[("eta", p, q)] = wedge(eta, part)
    return out


def lambda3_decompose(a: Form) -> Lambda3Split:
    _require_grade(a, 3, "lambda3_decompose")
    if not is_horizontal(a):
        raise ValueError("lambda3_decompose expects a horizontal 3-form")
    sf = structure_forms()
    tp, tm, om = (_like(f, a) for f in (sf.theta_plus, sf.theta_minus, sf.omega))
    real = a.tower == "R"
    re = tp * (inner(a, tp) / (4.0 if real else 4))
    im = tm * (inner(a, tm) / (4.0 if real else 4))
    six = Form()
    for i in range(1, 7):
        g = _like(e(i), a) ^ om
        c = inner(a, g)
        if c != 0:
            six = six + g * (c / (2.0 if real else 2))
    return Lambda3Split(re, im, six, a - re - im - six)


# -- instanton predicates ------------------------------------------------------------

def _components(F):
    """Scalar 2-forms making up F (a Form or a LieForm)."""
    if isinstance(F, Form):
        return [F]
    return list(F.components)


def instanton_predicates(F, tol: float = 1e-10) -> InstantonReport:
    comps = _components(F)
    psi = structure_forms().psi
    res = {"sdci": 0.0, "asdci": 0.0, "hym": 0.0, "g2": 0.0}
    flags = {"sdci": True, "asdci": True, "hym": True, "g2": True}
    for f in comps:
        _require_grade(f, 2, "instanton_predicates")
        exact = f.tower != "R"
        ls = L_sigma(f)
        checks = {
            "sdci": ls - f,
            "asdci": ls + f,
            "g2": wedge(f, _like(psi, f)),
        }
        types = pq_decompose(f)
        off = [part for key, part in types.items() if key != (1, 1)]
        trace = inner(f, _like(structure_forms().omega, f))
        hym_norm = float(np.sqrt(sum(p.norm() ** 2 for p in off) + abs(complex(trace)) ** 2))
        for key, val in checks.items():
            n = val.norm()
            res[key] = max(res[key], n)
            flags[key] &= (val.is_zero() if exact else n <= tol)
        res["hym"] = max(res["hym"], hym_norm)
        flags["hym"] &= ((not off and trace == 0) if exact else hym_norm <= tol)
    return InstantonReport(flags["sdci"], flags["asdci"], flags["hym"], flags["g2"], res)


# -- matrices for the lattice ---------------------------------------------------------

@lru_cache(maxsize=None)
def horizontal_two_form_frames():
    """Orthonormal frames (float) for Omega^2_6, Omega^2_1 and Omega^2_8 in blade coordinates."""
    from .exterior_core import coordinates
    eb = eigen_basis()
    om = structure_forms().omega
    f6 = np.array([[float(c) for c in coordinates(v, 2)] for v in eb.v]) / np.sqrt(2.0)
    f1 = np.array([[float(c) for c in coordinates(om, 2)]]) / np.sqrt(3.0)
    w = np.array([[float(c) for c in coordinates(x, 2)] for x in eb.w])
    q, _ = np.linalg.qr(w.T)
    return f6, f1, q.T
