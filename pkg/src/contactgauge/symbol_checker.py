"""Principal-symbol complexes at a covector and their exactness, by exact ranks."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import exact_linalg as xl
from .exterior_core import Form, basis_masks, coordinates, from_coordinates, hodge_star, wedge
from .lie_forms import quotient_projector
from .sasaki_ops import structure_forms


@dataclass
class SymbolComplex:
    covector: Form
    stages: list            # exact matrices (rows), stage k maps fiber k -> fiber k+1
    fiber_dims: list
    labels: list

    def ranks(self) -> list:
        return [xl.rank(m) if m and m[0] else 0 for m in self.stages]

    def compositions_vanish(self) -> bool:
        for a, b in zip(self.stages, self.stages[1:]):
            if not a or not b:
                continue
            if any(c != 0 for row in xl.matmul(b, a) for c in row):
                return False
        return True

    def exactness(self) -> dict:
        """Exactness at every fiber: dim ker(out) == rank(in), with zero maps at the ends."""
        r = self.ranks()
        padded = [0] + r + [0]
        defects = []
        for k, d in enumerate(self.fiber_dims):
            ker_out = d - padded[k + 1]
            im_in = padded[k]
            defects.append(ker_out - im_in)
        return {"ranks": r, "kernel_dims": [d - rk for d, rk in zip(self.fiber_dims, r)],
                "defects": defects, "exact": all(x == 0 for x in defects)
                and self.compositions_vanish()}


def _check_covector(s: Form):
    if s.grades() - {1}:
        raise ValueError("covector must be a 1-form")
    if s.is_zero():
        raise ValueError("covector must be nonzero")


def _blade_basis(k):
    return [Form({m: 1}) for m in basis_masks(k)]


def _stage(fn, inputs, k_out, out_frame=None):
    cols = []
    for x in inputs:
        y = coordinates(fn(x), k_out)
        if out_frame is not None:
            y = out_frame(y)
        cols.append(y)
    if not cols:
        return []
    return [list(r) for r in zip(*cols)]


def _combine(gens, s: Form):
    """Sum_i s_i * gens[i] for exact matrices gens[i] (one per coframe direction)."""
    coeffs = [s.coeff((i + 1,)) for i in range(7)]
    nr, nc = len(gens[0]), len(gens[0][0]) if gens[0] else 0
    out = [[0] * nc for _ in range(nr)]
    for c, g in zip(coeffs, gens):
        if c == 0:
            continue
        for r in range(nr):
            row, grow = out[r], g[r]
            for q in range(nc):
                if grow[q]:
                    row[q] += c * grow[q]
    return out


@lru_cache(maxsize=None)
def _extended_generators():
    star_sigma = hodge_star(structure_forms().sigma)
    gens = []
    for i in range(1, 8):
        ei = Form({(i,): 1})
        gens.append((
            _stage(lambda x: wedge(ei, x), _blade_basis(0), 1),
            _stage(lambda x: wedge(star_sigma, wedge(ei, x)), _blade_basis(1), 6),
            _stage(lambda x: wedge(ei, x), _blade_basis(6), 7),
        ))
    return [[g[k] for g in gens] for k in range(3)]


def build_extended_symbol(s: Form) -> SymbolComplex:
    """Lambda^0 -> Lambda^1 -> Lambda^6 -> Lambda^7 with s^, *sigma ^ s ^ and s^."""
    _check_covector(s)
    stages = [_combine(g, s) for g in _extended_generators()]
    return SymbolComplex(s, stages, [1, 7, 7, 1],
                         ["s^ : L0->L1", "*sigma^s^ : L1->L6", "s^ : L6->L7"])


@lru_cache(maxsize=None)
def quotient_basis(k: int, variant: str = "8") -> tuple:
    """Exact basis of the representative space L^k as forms."""
    p = quotient_projector(k, variant)
    rows = xl.row_space_basis([list(r) for r in p]) if p else []
    return tuple(from_coordinates(r, k) for r in rows)


@lru_cache(maxsize=None)
def _quotient_pivots(k: int, variant: str) -> tuple:
    p = quotient_projector(k, variant)
    return tuple(xl.rref([list(r) for r in p])[1]) if p else ()


def _reduce_coords(k, variant):
    """Project onto L^k and return coordinates in :func:`quotient_basis`.

    The basis rows are in reduced echelon form, so coordinates are the pivot entries.
    """
    p = quotient_projector(k, variant)
    piv = _quotient_pivots(k, variant)

    def apply(y):
        return [sum((p[i][j] * y[j] for j in range(len(y)) if y[j] != 0), Fraction(0))
                for i in piv]
    return apply


def _top_degree(variant):
    return max(k for k in range(8) if quotient_basis(k, variant))


@lru_cache(maxsize=None)
def _L_generators(variant: str):
    top = _top_degree(variant)
    out = []
    for k in range(top):
        per_dir = []
        for i in range(1, 8):
            ei = Form({(i,): 1})
            per_dir.append(_stage(lambda x: wedge(ei, x), quotient_basis(k, variant), k + 1,
                                  _reduce_coords(k + 1, variant)))
        out.append(per_dir)
    return out


def build_L_symbol(s: Form, variant: str = "8") -> SymbolComplex:
    """L^0 -> L^1 -> ... with p(s ^ .), in exact representative bases.

    The complex runs up to the last nonzero L^k (L^3 for the default ideal).
    """
    _check_covector(s)
    top = _top_degree(variant)
    stages = [_combine(g, s) for g in _L_generators(variant)]
    dims = [len(quotient_basis(k, variant)) for k in range(top + 1)]
    labels = [f"p(s^): L{k}->L{k + 1}" for k in range(top)]
    return SymbolComplex(s, stages, dims, labels)


def random_covector(rng, scale: int = 5) -> Form:
    while True:
        c = rng.integers(-scale, scale + 1, size=7)
        if np.any(c):
            den = rng.integers(1, 4, size=7)
            return Form({(i + 1,): Fraction(int(c[i]), int(den[i])) for i in range(7) if c[i]})


@dataclass
class SweepReport:
    which: str
    n: int
    seed: int
    failures: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"which": self.which, "n": self.n, "seed": self.seed,
                "failures": self.failures, "n_failures": len(self.failures),
                "rows": self.rows, "seconds": self.seconds}


def exactness_sweep(n: int, seed: int, which: str = "extended", covectors=None) -> SweepReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    if which not in ("extended", "L"):
        raise ValueError("which must be 'extended' or 'L'")
    rng = np.random.default_rng(seed)
    build = build_extended_symbol if which == "extended" else build_L_symbol
    rep = SweepReport(which, n, seed)
    t0 = time.perf_counter()
    for i in range(n):
        s = covectors[i] if covectors is not None else random_covector(rng)
        cx = build(s)
        ex = cx.exactness()
        row = {"covector": s.render(), "ranks": ex["ranks"], "kernel_dims": ex["kernel_dims"],
               "exact": ex["exact"]}
        rep.rows.append(row)
        if not ex["exact"]:
            rep.failures.append(row)
    rep.seconds = time.perf_counter() - t0
    return rep
