"""Exact identity checks for the 2-form and 3-form algebra of the contact Calabi-Yau model.

Each group returns rows (name, passed, detail).  Everything is exact: Form equality
over Q or Q(i), ranks by fraction-free elimination.
"""

from __future__ import annotations

import contextlib
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import exact_linalg as xl
from . import exterior_core as ec
from .exterior_core import Form, I, basis_masks, coordinates, e, hodge_star
from .lie_forms import quotient_dim, reduce_form
from .sasaki_ops import (
    L_epsilon, L_sigma, L_star_sigma, eigen_basis, instanton_predicates,
    is_horizontal, structure_forms, transverse_star,
)

HALF = Fraction(1, 2)


@dataclass
class CheckResult:
    group: str
    anchor: str
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"group": self.group, "anchor": self.anchor, "name": self.name,
                "passed": bool(self.passed), "detail": self.detail}


@dataclass
class SuiteReport:
    rows: list = field(default_factory=list)
    seconds: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r.passed]


def _eq(lhs: Form, rhs: Form):
    diff = lhs - rhs
    return diff.is_zero(), "" if diff.is_zero() else f"lhs - rhs = {diff.render()}"


def _v():
    return eigen_basis().v


def _w():
    return eigen_basis().w


# -- groups ------------------------------------------------------------------------------

def check_eigenspaces():
    sf, v, w = structure_forms(), _v(), _w()
    rows = []
    for i, vi in enumerate(v, 1):
        rows.append((f"L_sigma(v{i}) = -v{i}", *_eq(L_sigma(vi), -vi)))
    for j, wj in enumerate(w, 1):
        rows.append((f"L_sigma(w{j}) = w{j}", *_eq(L_sigma(wj), wj)))
    rows.append(("L_sigma(omega) = -2 omega", *_eq(L_sigma(sf.omega), sf.omega * -2)))
    for i in range(1, 7):
        rows.append((f"L_sigma(e{i}7) = 0", *_eq(L_sigma(e(i, 7)), Form())))
    m = ec.matrix_of(L_sigma, 2, 2, exact=True)
    n = len(m)
    mult = {}
    for lam in (-2, -1, 1, 0):
        shifted = [[m[r][c] - (lam if r == c else 0) for c in range(n)] for r in range(n)]
        mult[lam] = n - xl.rank(shifted)
    got = (mult[-2], mult[-1], mult[1], mult[0])
    rows.append(("eigenvalue multiplicities (-2, -1, +1, 0) = (1, 6, 8, 6)",
                 got == (1, 6, 8, 6), f"computed {got}"))
    return rows


ACTION_TABLE = (
    ((1, 2), [((4, 5), 1)]), ((1, 3), [((4, 6), 1)]), ((1, 5), [((2, 4), 1)]),
    ((1, 4), [((3, 6), -1), ((2, 5), -1)]), ((4, 5), [((1, 2), 1)]),
    ((1, 6), [((3, 4), 1)]), ((2, 3), [((5, 6), 1)]), ((2, 4), [((1, 5), 1)]),
    ((2, 5), [((3, 6), -1), ((1, 4), -1)]), ((4, 6), [((1, 3), 1)]),
    ((2, 6), [((3, 5), 1)]), ((3, 4), [((1, 6), 1)]), ((3, 5), [((2, 6), 1)]),
    ((3, 6), [((2, 5), -1), ((1, 4), -1)]), ((5, 6), [((2, 3), 1)]),
)


def check_action_table():
    rows = []
    for src, img in ACTION_TABLE:
        rhs = Form({k: c for k, c in img})
        rows.append((f"L_sigma(e{src[0]}{src[1]}) = {rhs.render()}", *_eq(L_sigma(e(*src)), rhs)))
    return rows


def _dz():
    sf = structure_forms()
    return sf.dz, sf.dzbar


def check_complex_basis():
    """Real eigenbasis written in dz, dzbar."""
    dz, dzb = _dz()
    v, w, om = _v(), _w(), structure_forms().omega
    h, ih = HALF, I * HALF

    def pp(a, b):
        return dz[a] ^ dz[b]

    def pb(a, b):
        return dz[a] ^ dzb[b]

    def bb(a, b):
        return dzb[a] ^ dzb[b]

    w_expr = [
        (pb(0, 1) - pb(1, 0)) * h, (pb(0, 1) + pb(1, 0)) * ih,
        (pb(0, 2) - pb(2, 0)) * h, (pb(0, 2) + pb(2, 0)) * ih,
        (pb(1, 2) - pb(2, 1)) * h, (pb(1, 2) + pb(2, 1)) * ih,
        (pb(0, 0) - pb(2, 2)) * ih, (pb(1, 1) - pb(2, 2)) * ih,
    ]
    v_expr = [
        (pp(0, 1) + bb(0, 1)) * h, (bb(0, 1) - pp(0, 1)) * ih,
        (pp(0, 2) + bb(0, 2)) * h, (bb(0, 2) - pp(0, 2)) * ih,
        (pp(1, 2) + bb(1, 2)) * h, (bb(1, 2) - pp(1, 2)) * ih,
    ]
    rows = [(f"w{j} in complex coordinates", *_eq(x, wj)) for j, (x, wj) in enumerate(zip(w_expr, w), 1)]
    rows += [(f"v{i} in complex coordinates", *_eq(x, vi)) for i, (x, vi) in enumerate(zip(v_expr, v), 1)]
    rows.append(("omega = i/2 sum dz ^ dzbar",
                 *_eq((pb(0, 0) + pb(1, 1) + pb(2, 2)) * ih, om)))
    return rows


def check_complex_products():
    """Expansions of dz ^ dz, dz ^ dzbar and dzbar ^ dzbar in the real eigenbasis."""
    dz, dzb = _dz()
    v, w = _v(), _w()
    table = [
        ("dz1^dz2", dz[0] ^ dz[1], v[0] + I * v[1]),
        ("dz1^dz3", dz[0] ^ dz[2], v[2] + I * v[3]),
        ("dz2^dz3", dz[1] ^ dz[2], v[4] + I * v[5]),
        ("dz1^dzbar2", dz[0] ^ dzb[1], w[0] - I * w[1]),
        ("dz1^dzbar3", dz[0] ^ dzb[2], w[2] - I * w[3]),
        ("dz2^dzbar3", dz[1] ^ dzb[2], w[4] - I * w[5]),
        ("dz1^dzbar1", dz[0] ^ dzb[0], e(1, 4) * (I * -2)),
        ("dz2^dzbar2", dz[1] ^ dzb[1], e(2, 5) * (I * -2)),
        ("dz3^dzbar3", dz[2] ^ dzb[2], e(3, 6) * (I * -2)),
        ("dz2^dzbar1", dz[1] ^ dzb[0], -(w[0] + I * w[1])),
        ("dz3^dzbar1", dz[2] ^ dzb[0], -(w[2] + I * w[3])),
        ("dz3^dzbar2", dz[2] ^ dzb[1], -(w[4] + I * w[5])),
        ("dzbar1^dzbar2", dzb[0] ^ dzb[1], v[0] - I * v[1]),
        ("dzbar1^dzbar3", dzb[0] ^ dzb[2], v[2] - I * v[3]),
        ("dzbar2^dzbar3", dzb[1] ^ dzb[2], v[4] - I * v[5]),
    ]
    return [(f"{name} expansion", *_eq(lhs, rhs)) for name, lhs, rhs in table]


def check_star_sigma():
    sf = structure_forms()
    star_sigma = hodge_star(sf.sigma)
    listed = -(e(2, 3, 5, 6) + e(1, 3, 4, 6) + e(1, 2, 4, 5))
    om2 = sf.omega ^ sf.omega
    return [
        ("omega^2 = -2 (e1245 + e1346 + e2356)", *_eq(om2, (e(1, 2, 4, 5) + e(1, 3, 4, 6) + e(2, 3, 5, 6)) * -2)),
        ("*sigma = -(e2356 + e1346 + e1245)", *_eq(star_sigma, listed)),
        ("*sigma = 1/2 omega^2", *_eq(star_sigma, om2 * HALF)),
    ]


def _exact_rank(forms, k):
    rows = [coordinates(f, k) for f in forms]
    return xl.rank(rows) if rows else 0


def check_L_star_sigma():
    v, w, om = _v(), _w(), structure_forms().omega
    rows = []
    bad = [f"v{i}" for i, x in enumerate(v, 1) if not L_star_sigma(x).is_zero()]
    rows.append(("L_{*sigma} vanishes on Omega^2_6", not bad, ", ".join(bad)))
    bad = [f"w{j}" for j, x in enumerate(w, 1) if not L_star_sigma(x).is_zero()]
    rows.append(("L_{*sigma} vanishes on Omega^2_8", not bad, ", ".join(bad)))
    dom = [om] + [e(i, 7) for i in range(1, 7)]
    r = _exact_rank([L_star_sigma(x) for x in dom], 6)
    rows.append(("L_{*sigma}: Omega^2_1 + Omega^2_V -> Lambda^6 is bijective", r == 7, f"rank {r} of 7"))
    return rows


L_EPSILON_TABLE = ((1, 5, -1), (2, 3, -1), (3, 1, -1), (4, 6, -1), (5, 4, -1), (6, 2, -1))


def check_L_epsilon():
    v = _v()
    rows = []
    pieces = (("Omega^2_8", "w", _w()), ("Omega^2_1", "omega", (structure_forms().omega,)),
              ("Omega^2_6", "v", v))
    for space, label, basis in pieces:
        bad = [f"{label}{i}" if len(basis) > 1 else label
               for i, b in enumerate(basis, 1) if not L_epsilon(b).is_zero()]
        rows.append((f"L_epsilon vanishes on {space}", not bad, ", ".join(bad)))
    imgs = [L_epsilon(e(i, 7)) for i in range(1, 7)]
    r = _exact_rank(imgs, 2)
    r_all = _exact_rank(imgs + list(v), 2)
    rows.append(("L_epsilon: Omega^2_V -> Omega^2_6 is bijective", r == 6 and r_all == 6,
                 f"rank {r}, rank with v-basis {r_all}"))
    for i, j, s in L_EPSILON_TABLE:
        rows.append((f"L_epsilon(e{i}7) = {'-' if s < 0 else ''}v{j}", *_eq(imgs[i - 1], v[j - 1] * s)))
    return rows


WEDGE_TABLE = (
    ((3, 4, 5), (0, 0, 1)), ((1, 5, 6), (0, 0, 1)), ((1, 2, 6), (0, 1, 0)),
    ((1, 3, 5), (0, -1, 0)), ((4, 5, 6), (0, -1, 0)), ((2, 3, 4), (0, 1, 0)),
    ((1, 2, 3), (0, 0, -1)), ((2, 4, 6), (0, 0, -1)),
)

# (generator as blade combination, (sign, w index, coframe index)) for the 12-dimensional piece
TWELVE_GENERATORS = (
    ([((1, 2, 6), 1), ((1, 3, 5), 1)], (1, 6, 1)),
    ([((1, 2, 6), 1), ((4, 5, 6), 1)], (1, 1, 6)),
    ([((1, 2, 6), 1), ((2, 3, 4), -1)], (-1, 4, 2)),
    ([((1, 3, 5), 1), ((4, 5, 6), -1)], (1, 3, 5)),
    ([((1, 3, 5), 1), ((2, 3, 4), 1)], (-1, 2, 3)),
    ([((4, 5, 6), 1), ((2, 3, 4), 1)], (1, 5, 4)),
    ([((3, 4, 5), 1), ((1, 5, 6), -1)], (1, 4, 5)),
    ([((3, 4, 5), 1), ((1, 2, 3), 1)], (1, 1, 3)),
    ([((3, 4, 5), 1), ((2, 4, 6), 1)], (-1, 6, 4)),
    ([((1, 5, 6), 1), ((1, 2, 3), 1)], (1, 5, 1)),
    ([((1, 5, 6), 1), ((2, 4, 6), 1)], (1, 2, 6)),
    ([((1, 2, 3), 1), ((2, 4, 6), -1)], (-1, 3, 2)),
)


def _horizontal_blades(k):
    return [Form({m: 1}) for m in basis_masks(k) if is_horizontal(Form({m: 1}))]


def check_lambda3():
    sf = structure_forms()
    om, tp, tm, w = sf.omega, sf.theta_plus, sf.theta_minus, _w()
    top = e(1, 2, 3, 4, 5, 6)
    rows = []
    rows.append(("Theta_+ = (e123 + e246) - (e345 + e156)",
                 *_eq(tp, e(1, 2, 3) + e(2, 4, 6) - e(3, 4, 5) - e(1, 5, 6))))
    rows.append(("Theta_- = (e126 + e234) - (e456 + e135)",
                 *_eq(tm, e(1, 2, 6) + e(2, 3, 4) - e(4, 5, 6) - e(1, 3, 5))))
    for blade, signs in WEDGE_TABLE:
        b = e(*blade)
        for name, rhs_form, s in zip(("omega", "Theta_+", "Theta_-"), (om, tp, tm), signs):
            rows.append((f"e{''.join(map(str, blade))} ^ {name} = {s} e123456",
                         *_eq(b ^ rhs_form, top * s)))
    h3 = _horizontal_blades(3)
    # Lambda^3_12: common kernel of ^omega, ^Theta_+, ^Theta_- on horizontal 3-forms
    cond = []
    for f, k in ((om, 5), (tp, 6), (tm, 6)):
        mat = [coordinates(b ^ f, k) for b in h3]
        cond.extend(list(r) for r in zip(*mat))
    d12 = len(h3) - xl.rank(cond)
    d6 = _exact_rank([e(i) ^ om for i in range(1, 7)], 3)
    d_re, d_im = _exact_rank([tp], 3), _exact_rank([tm], 3)
    total = _exact_rank([tp, tm] + [e(i) ^ om for i in range(1, 7)], 3) + d12
    dims = (d_re, d_im, d6, d12)
    rows.append(("horizontal 3-form pieces have dims (1, 1, 6, 12) and span", dims == (1, 1, 6, 12)
                 and total == 20, f"computed {dims}, total {total}"))
    for terms, (s, wi, xi) in TWELVE_GENERATORS:
        g = Form({k: c for k, c in terms})
        ann = all((g ^ f).is_zero() for f in (om, tp, tm))
        same = ((w[wi - 1] ^ e(xi)) * s - g).is_zero()
        label = " ".join(f"{'+' if c > 0 else '-'}e{''.join(map(str, k))}" for k, c in terms)
        rows.append((f"{label} lies in Lambda^3_12 and equals {'-' if s < 0 else ''}w{wi}^e{xi}",
                     ann and same, f"annihilated {ann}, matches {same}"))
    for i in range(1, 7):
        rhs = (w[6] ^ e(i)) + (w[7] ^ e(i)) + (e(3, 6) ^ e(i)) * 3
        rows.append((f"omega ^ e{i} = w7^e{i} + w8^e{i} + 3 e36{i}", *_eq(om ^ e(i), rhs)))
    return rows


def check_quotient():
    dims = tuple(quotient_dim(k) for k in range(8))
    rows = [("quotient dims (1, 7, 13, 7, 0, 0, 0, 0)", dims == (1, 7, 13, 7, 0, 0, 0, 0), f"computed {dims}")]
    bad = [b.render() for b in _horizontal_blades(3) if not reduce_form(b).is_zero()]
    rows.append(("every horizontal 3-form reduces to 0 in L^3", not bad, ", ".join(bad)))
    return rows


def check_compatibility():
    rows = []
    bad = []
    for k in range(8):
        for m in basis_masks(k):
            b = Form({m: 1})
            if not ec.compat_residual(b).is_zero():
                bad.append(b.render())
    rows.append(("i_xi * a = (-1)^p *(eta ^ a) on every blade", not bad, ", ".join(bad[:5])))
    bad = [Form({m: 1}).render() for k in range(8) for m in basis_masks(k)
           if not (hodge_star(hodge_star(Form({m: 1}))) - Form({m: 1})).is_zero()]
    rows.append(("** = 1 in dimension 7", not bad, ", ".join(bad[:5])))
    bad = []
    for k in range(7):
        for b in _horizontal_blades(k):
            if not (hodge_star(b) - (transverse_star(b) ^ e(7))).is_zero():
                bad.append(b.render())
    rows.append(("*a = *_T a ^ eta on horizontal forms", not bad, ", ".join(bad[:5])))
    return rows


def _random_w(rng, scale=5):
    out = Form()
    for wj in _w():
        c = int(rng.integers(-scale, scale + 1))
        if c:
            out = out + wj * Fraction(c, int(rng.integers(1, 4)))
    return out


def _random_two_form(rng, scale=3):
    """Random exact 2-form whose four pieces are each switched on or off at random."""
    v, w, om = _v(), _w(), structure_forms().omega
    pieces = [list(v), list(w), [om], [e(i, 7) for i in range(1, 7)]]
    out = Form()
    for basis in pieces:
        if rng.random() < 0.5:
            continue
        for b in basis:
            c = int(rng.integers(-scale, scale + 1))
            if c:
                out = out + b * c
    return out


def check_instantons(n: int = 1000, seed: int = 0):
    rng = np.random.default_rng(seed)
    psi = structure_forms().psi
    bad_g2 = bad_sd = 0
    for _ in range(n):
        F = _random_w(rng)
        if not (F ^ psi).is_zero():
            bad_g2 += 1
        if not (L_sigma(F) - F).is_zero():
            bad_sd += 1
    rows = [(f"F ^ psi = 0 for {n} random F in span(w)", bad_g2 == 0, f"{bad_g2} failures"),
            (f"L_sigma F = F for {n} random F in span(w)", bad_sd == 0, f"{bad_sd} failures")]
    fwd = back = n_sd = 0
    for _ in range(n):
        F = _random_two_form(rng)
        rep = instanton_predicates(F)
        n_sd += rep.sdci
        if rep.sdci and not rep.hym:
            fwd += 1
        if rep.hym and not rep.sdci:
            back += 1
    rows.append((f"selfdual implies HYM on {n} random 2-forms", fwd == 0,
                 f"{fwd} failures, {n_sd} selfdual samples"))
    rows.append((f"HYM implies selfdual on {n} random 2-forms", back == 0, f"{back} failures"))
    return rows


GROUPS = {
    "eigenspaces": ("L_sigma eigenspaces on 2-forms", check_eigenspaces),
    "action_table": ("L_sigma action on horizontal 2-blades", check_action_table),
    "complex_basis": ("real 2-form basis in complex coordinates", check_complex_basis),
    "complex_products": ("complex 2-forms expanded in the real basis", check_complex_products),
    "star_sigma": ("Hodge dual of sigma = eta ^ omega", check_star_sigma),
    "L_star_sigma": ("kernel and image of wedge with *sigma", check_L_star_sigma),
    "L_epsilon": ("L_epsilon kernel and vertical isomorphism", check_L_epsilon),
    "lambda3": ("SU(3) split of horizontal 3-forms and wedge table", check_lambda3),
    "quotient": ("quotient of forms by the instanton ideal", check_quotient),
    "compatibility": ("Hodge star, eta and transverse star compatibility", check_compatibility),
    "instantons": ("contact instantons versus G2 and HYM conditions", check_instantons),
}


def _clear_caches():
    """Drop every lru cache in the package (orientation-dependent values live there)."""
    pkg = __name__.rsplit(".", 1)[0]
    for name, mod in list(sys.modules.items()):
        if not name.startswith(pkg) or mod is None:
            continue
        for obj in list(vars(mod).values()):
            if callable(getattr(obj, "cache_clear", None)):
                obj.cache_clear()


@contextlib.contextmanager
def flipped_orientation():
    """Fault injection: reverse the volume form, hence the sign of every Hodge star."""
    old = ec.ORIENTATION
    ec.ORIENTATION = -old
    _clear_caches()
    try:
        yield
    finally:
        ec.ORIENTATION = old
        _clear_caches()


def run_suite(select=None, n_random: int = 1000, seed: int = 0) -> SuiteReport:
    """Run the named groups (all when ``select`` is None) and collect rows."""
    names = list(GROUPS) if select is None else [g for g in GROUPS if g in set(select)]
    rep = SuiteReport()
    if select is not None:
        unknown = sorted(set(select) - set(GROUPS))
        if unknown:
            rep.warnings.append(f"unknown groups ignored: {', '.join(unknown)}")
    if not names:
        rep.warnings.append("no check groups selected")
    t0 = time.perf_counter()
    for g in names:
        anchor, fn = GROUPS[g]
        rows = fn(n_random, seed) if g == "instantons" else fn()
        for name, ok, detail in rows:
            rep.rows.append(CheckResult(g, anchor, name, bool(ok), detail))
    rep.seconds = time.perf_counter() - t0
    return rep
