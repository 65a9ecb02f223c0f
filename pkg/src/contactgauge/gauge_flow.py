"""Gauge functionals, the d7 operator, the selfdual-instanton flow, basic cohomology,
Hodge data, Kuranishi/obstruction maps and the moduli Kahler data on the lattice.

Lie-algebra traces are taken with the positive invariant pairing of the algebra
(``tr`` below means that pairing), so ||F||^2 = Int <F ^ *F> is non-negative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import transverse_lattice as tl
from .exterior_core import hodge_star, matrix_of, wedge
from .lie_forms import quotient_dim, quotient_frame
from .sasaki_ops import horizontal_two_form_frames, structure_forms
from .transverse_lattice import Connection, GridField

RANK_CUT = 1e-7
GAP_MIN = 1e3


class KuranishiError(RuntimeError):
    pass


class HarmonicInputError(ValueError):
    def __init__(self, what: str, residual: float):
        super().__init__(f"{what} is not harmonic (residual {residual:.3e})")
        self.residual = residual


# -- projectors and scalar integrals --------------------------------------------------

def _vertical_projector() -> np.ndarray:
    p = np.zeros((tl.nb(2), tl.nb(2)))
    v = tl.vertical_index(2)
    p[v, v] = 1.0
    return p


def energy_projector() -> np.ndarray:
    """Q = P6 + P1 on the horizontal part plus the vertical part: E(A) = ||Q F_A||^2."""
    return tl.p61_projector() + _vertical_projector()


def _vol_coefficient(top: np.ndarray) -> float:
    """Integral of a scalar 7-form given as (1, *grid) coefficients of e^{1..7}."""
    return float(np.mean(top[0]))


def _wedge_const_matrix(form, k: int) -> np.ndarray:
    return matrix_of(lambda x: wedge(x, form), k, k + form.grade)


def integrate_pairing(a: GridField, b: GridField, form) -> float:
    """Int <a ^ b> ^ form for a constant scalar form completing to degree 7."""
    pair = tl.trace_pair_field(a, b)
    k = a.grade + b.grade
    if k + form.grade != 7:
        raise ValueError("degrees do not add up to 7")
    return _vol_coefficient(tl.apply_fiber(_wedge_const_matrix(form, k), pair))


# -- curvature and functionals --------------------------------------------------------

def curvature(A: Connection) -> GridField:
    return tl.curvature(A)


def bianchi_residual(A: Connection) -> float:
    return tl.cov_d(A, curvature(A)).norm()


@dataclass
class EnergyRecord:
    ym: float
    h_plus: float
    h_minus: float
    vertical: float
    omega1: float
    residual: float


def energy_decomposition(A: Connection) -> EnergyRecord:
    """Y = ||F||^2 against ||F_H^+||^2 + ||F_H^-||^2 + ||F_V||^2, F_H^+- = 1/2 (F_H +- L_sigma F_H).

    ``omega1`` is ||P1 F_H||^2; the decomposition residual equals 3/2 of it.
    """
    F = curvature(A)
    FH, FV = F.horizontal(), F.vertical()
    LF = FH.fiber(tl.l_sigma_matrix(), 2)
    Fp, Fm = (FH + LF) * 0.5, (FH - LF) * 0.5
    _, f1, _ = horizontal_two_form_frames()
    ym = F.norm() ** 2
    hp, hm, v = Fp.norm() ** 2, Fm.norm() ** 2, FV.norm() ** 2
    om1 = FH.fiber(f1.T @ f1, 2).norm() ** 2
    return EnergyRecord(ym, hp, hm, v, om1, abs(ym - (hp + hm + v)))


def charge_kappa(A: Connection) -> float:
    """kappa(A) = Int tr(F ^ F) ^ sigma."""
    F = curvature(A)
    return integrate_pairing(F, F, structure_forms().sigma)


def bound_chain(A: Connection) -> dict:
    rec = energy_decomposition(A)
    k = charge_kappa(A)
    return {"kappa": k, "h_plus": rec.h_plus, "ym": rec.ym,
            "kappa_le_h_plus": abs(k) <= rec.h_plus + 1e-12,
            "h_plus_le_ym": rec.h_plus <= rec.ym + 1e-12}


def charge_gauge_variation(A: Connection, alpha: GridField) -> float:
    """kappa(A) - kappa(A + alpha) - Int tr(F_A ^ alpha) ^ omega^2 (the stated identity)."""
    om = structure_forms().omega
    F = curvature(A)
    return charge_kappa(A) - charge_kappa(A + alpha) - integrate_pairing(F, alpha, om ^ om)


def charge_variation_corrected(A: Connection, alpha: GridField) -> float:
    """kappa(A+alpha) - kappa(A) - Int tr(2 alpha^F + alpha^d_A alpha + 1/3 alpha^[alpha^alpha]) ^ omega^2.

    Obtained from tr(F'^F') - tr(F^F) = d tr(...) and d sigma = omega^2.
    """
    om2 = structure_forms().omega ^ structure_forms().omega
    F = curvature(A)
    rhs = (2 * integrate_pairing(alpha, F, om2)
           + integrate_pairing(alpha, tl.cov_d(A, alpha), om2)
           + integrate_pairing(alpha, tl.bracket(alpha, alpha), om2) / 3.0)
    return charge_kappa(A + alpha) - charge_kappa(A) - rhs


def chern_simons(A0: Connection, alpha: GridField) -> float:
    """CS(A0 + alpha) = 1/2 Int tr(d_{A0} alpha ^ alpha + 2/3 alpha^alpha^alpha) ^ *sigma.

    For Lie-valued 1-forms alpha^alpha = 1/2 [alpha ^ alpha].
    """
    ss = hodge_star(structure_forms().sigma)
    quad = integrate_pairing(tl.cov_d(A0, alpha), alpha, ss)
    cubic = integrate_pairing(alpha, tl.bracket(alpha, alpha), ss) / 3.0
    return 0.5 * (quad + cubic)


# -- d7 ---------------------------------------------------------------------------

def d7(A: Connection, alpha: GridField) -> GridField:
    return tl.d7(A, alpha)


def d7_route(A: Connection, alpha: GridField) -> GridField:
    return tl.d7_route(A, alpha)


def d7_route_residual(A: Connection, alpha: GridField) -> float:
    return (d7(A, alpha) - d7_route(A, alpha)).norm()


def complex_property_residual(A: Connection, f: GridField) -> float:
    """||d7(d_A f) - p[F_A ^ f]|| for a 0-form f."""
    F = curvature(A)
    lhs = d7(A, tl.cov_d(A, f))
    rhs = tl.bracket(F, f).fiber(tl.p61_projector(), 2)
    return (lhs - rhs).norm()


# -- flow -----------------------------------------------------------------------------

@dataclass
class FlowConfig:
    max_iter: int = 500
    tol: float = 1e-8
    armijo_c: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1e-3
    min_step: float = 1e-14
    direction: str = "lbfgs"        # or "gradient"
    memory: int = 10

    def __post_init__(self):
        if self.direction not in ("lbfgs", "gradient"):
            raise ValueError("direction must be 'lbfgs' or 'gradient'")
        if self.max_iter < 0 or self.tol < 0 or not 0 < self.shrink < 1:
            raise ValueError("invalid flow parameters")


@dataclass
class FlowState:
    A: Connection
    energy_history: list = field(default_factory=list)
    residual: float = float("nan")
    step: float = 0.0
    iteration: int = 0
    status: str = "running"

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {"residual": self.residual, "step": self.step, "iteration": self.iteration,
                "status": self.status, "energy_history": list(self.energy_history)}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy"])
            for i, v in enumerate(self.energy_history):
                w.writerow([i, repr(v)])


def flow_energy(A: Connection):
    QF = curvature(A).fiber(energy_projector(), 2)
    return QF.norm() ** 2, QF


def flow_gradient(A: Connection, QF: GridField) -> GridField:
    # dE[a] = 2 (Q F, d_A a) since Q is an orthogonal projector
    return tl.cov_d_adjoint(A, QF) * 2.0


def _lbfgs_direction(g: GridField, hist: list, fallback: float) -> GridField:
    ip = tl.inner_product
    q, alphas = g, []
    for s, y in reversed(hist):
        a = ip(s, q) / ip(y, s)
        alphas.append(a)
        q = q - y * a
    if hist:
        s, y = hist[-1]
        q = q * (ip(s, y) / ip(y, y))
    else:
        q = q * fallback
    for (s, y), a in zip(hist, reversed(alphas)):
        b = ip(y, q) / ip(y, s)
        q = q + s * (a - b)
    return -q


def sdci_flow(A0: Connection, config: FlowConfig | None = None) -> FlowState:
    """Descent on E(A) = ||p(F_A)||^2 + ||F_V||^2 with Armijo backtracking.

    Search directions are L-BFGS (default) or steepest descent; every accepted step
    satisfies E_new <= E + c t <grad, d> with <grad, d> < 0, so E is non-increasing.
    """
    cfg = config or FlowConfig()
    A = A0
    E, QF = flow_energy(A)
    state = FlowState(A, [E], E)
    if not np.isfinite(E):
        state.status = "diverged"
        return state
    g = flow_gradient(A, QF)
    hist: list = []
    t = cfg.initial_step
    for it in range(cfg.max_iter + 1):
        state.iteration = it
        if E <= cfg.tol:
            state.status = "converged"
            break
        if it == cfg.max_iter:
            state.status = "max_iter"
            break
        if cfg.direction == "lbfgs":
            d = _lbfgs_direction(g, hist, cfg.initial_step)
            t = 1.0
        else:
            d = -g
        slope = tl.inner_product(g, d)
        if slope >= 0:
            d, slope, hist = -g, -g.norm() ** 2, []
        while True:
            An = A + d * t
            En, QFn = flow_energy(An)
            if not np.isfinite(En):
                state.status = "diverged"
                return state
            if En <= E + cfg.armijo_c * t * slope:
                break
            t *= cfg.shrink
            if t < cfg.min_step:
                state.status = "stalled"
                return state
        gn = flow_gradient(An, QFn)
        s, y = An.field - A.field, gn - g
        if tl.inner_product(s, y) > 1e-300:
            hist = (hist + [(s, y)])[-cfg.memory:]
        if cfg.direction == "gradient":
            sy = tl.inner_product(s, y)
            t = tl.inner_product(s, s) / sy if sy > 0 else 2 * t
        A, E, g = An, En, gn
        state.A, state.residual, state.step = A, E, t
        state.energy_history.append(E)
    state.A, state.residual = A, E
    return state


def endpoint_split(A: Connection) -> dict:
    """Norms of the Omega^2_6, Omega^2_1, Omega^2_8 and vertical parts of F_A."""
    F = curvature(A)
    f6, f1, f8 = horizontal_two_form_frames()
    return {"p6": F.fiber(f6.T @ f6, 2).norm(), "p1": F.fiber(f1.T @ f1, 2).norm(),
            "p8": F.fiber(f8.T @ f8, 2).norm(), "pv": F.vertical().norm(), "total": F.norm()}


def pointwise_predicates(A: Connection, tol: float = 1e-10, n_oracle: int = 8) -> dict:
    """Instanton residuals of F_A at every lattice point.

    The residuals are computed with fiber matrices; sasaki_ops.instanton_predicates is run
    on the ``n_oracle`` points of largest curvature and must agree with them.
    """
    from .exterior_core import coordinates, from_coordinates
    from .lie_forms import LieForm
    from .sasaki_ops import instanton_predicates

    F = curvature(A)
    dg = F.algebra.dim
    d = F.data.reshape(tl.nb(2), dg, -1)
    ls = tl.l_sigma_matrix()
    wpsi = _wedge_const_matrix(structure_forms().psi, 2)
    om = np.array([float(c) for c in coordinates(structure_forms().omega, 2)])
    f6 = horizontal_two_form_frames()[0]
    vidx = tl.vertical_index(2)

    def nrm(x):
        return np.sqrt(np.sum(np.abs(x) ** 2, axis=0))

    lsd = np.tensordot(ls, d, axes=(1, 0))
    res = {
        "sdci": nrm(lsd - d).max(axis=0),
        "asdci": nrm(lsd + d).max(axis=0),
        "g2": nrm(np.tensordot(wpsi, d, axes=(1, 0))).max(axis=0),
        "hym": np.sqrt(nrm(np.tensordot(f6, d, axes=(1, 0))) ** 2 + nrm(d[vidx]) ** 2
                       + np.tensordot(om, d, axes=(0, 0)) ** 2).max(axis=0),
    }
    size = nrm(d).max(axis=0)
    worst = 0.0
    for p in np.argsort(size)[::-1][:n_oracle]:
        comps = [from_coordinates([float(c) for c in d[:, a, p]], 2) for a in range(dg)]
        rep = instanton_predicates(LieForm.from_components(F.algebra, comps), tol)
        for key in res:
            worst = max(worst, abs(rep.residuals[key] - res[key][p]))
    scale = float(size.max())
    return {
        "points": int(d.shape[-1]),
        "tol": tol,
        "max_curvature": scale,
        "max_residual": {k: float(v.max()) for k, v in res.items()},
        "holds_everywhere": {k: bool(v.max() <= tol) for k, v in res.items()},
        "oracle_points": int(min(n_oracle, d.shape[-1])),
        "oracle_discrepancy": float(worst),
    }


# -- transverse Laplacian -----------------------------------------------------------

def transverse_laplacian(A: Connection, k: int):
    """Delta_T = D_T D_T^* + D_T^* D_T - D_V^2 on horizontal k-forms, k in {0, 1, 2}."""
    if k not in (0, 1, 2):
        raise ValueError("transverse Laplacian is provided for grades 0, 1, 2")

    def op(f: GridField) -> GridField:
        out = tl.D_T_adjoint(A, tl.D_T(A, f)) - tl.D_V(A, tl.D_V(A, f))
        if k > 0:
            out = out + tl.D_T(A, tl.D_T_adjoint(A, f))
        return out
    return op


def assemble_transverse_laplacian(A: Connection, k: int, cap: int = tl.DEFAULT_CAP) -> np.ndarray:
    fr = tl.fiber_frame(f"H{k}")
    return tl.assemble(transverse_laplacian(A, k), A.grid, A.algebra, k, fr, fr, k, cap)


# -- complexes: Fourier blocks (constant A) or dense matrices -------------------------------

BASIC_FRAMES = ("H0", "H1", "B2")


def _frames(kind: str):
    if kind == "basic":
        return [tl.fiber_frame(n) for n in BASIC_FRAMES], [0, 1, 2]
    if kind == "L":
        top = max(k for k in range(8) if quotient_dim(k))
        return [quotient_frame(k) for k in range(top + 1)], list(range(top + 1))
    raise ValueError("complex kind must be 'basic' or 'L'")


class Complex:
    """A cochain complex of framed fields with stage matrices.

    For constant connections the stages are block diagonal in Fourier modes and are
    stored as arrays (n_modes, out, in); otherwise one dense real block is assembled.
    Vectors are arrays (n_blocks, dim) in either case.
    """

    def __init__(self, A: Connection, kind: str = "basic", cap: int = tl.DEFAULT_CAP,
                 method: str = "auto"):
        self.A, self.kind, self.cap = A, kind, cap
        self.grid, self.algebra = A.grid, A.algebra
        self.frames, self.grades = _frames(kind)
        if method == "auto":
            method = "modes" if A.is_constant() else "dense"
        if method not in ("modes", "dense"):
            raise ValueError("method must be 'auto', 'modes' or 'dense'")
        self.method = method
        self.stages = [self._stage(k) for k in range(len(self.frames) - 1)]
        self._svd = [None] * len(self.stages)

    def _stage(self, k):
        fin, fout = self.frames[k], self.frames[k + 1]
        gin, gout = self.grades[k], self.grades[k + 1]
        if self.method == "modes":
            a = self.A.constant_value()
            return tl.mode_matrix_cov_d(self.algebra, a, gin, self.grid.mode_symbols(), fin, fout)
        mat = tl.assemble(lambda f: tl.cov_d(self.A, f), self.grid, self.algebra, gin, fin, fout,
                          gout, cap=self.cap)
        return mat[None]

    def dims(self) -> list:
        return [fr.shape[0] * self.algebra.dim for fr in self.frames]

    # vectors <-> fields
    def to_vec(self, f: GridField, k: int) -> np.ndarray:
        fr = self.frames[k]
        if self.method == "modes":
            return tl.to_modes(f, fr)
        return tl.framed(f, fr)[None]

    def from_vec(self, v: np.ndarray, k: int) -> GridField:
        fr, g = self.frames[k], self.grades[k]
        if self.method == "modes":
            return tl.from_modes(v, self.grid, self.algebra, fr, g)
        return tl.unframed(v[0], self.grid, self.algebra, fr, g)

    def apply(self, k: int, v: np.ndarray, adjoint: bool = False) -> np.ndarray:
        m = self.stages[k]
        if adjoint:
            m = np.conj(np.swapaxes(m, -1, -2))
        return np.einsum("mab,mb->ma", m, v)

    def svd(self, k: int):
        if self._svd[k] is None:
            self._svd[k] = np.linalg.svd(self.stages[k], full_matrices=True)
        return self._svd[k]

    def stage_rank(self, k: int) -> dict:
        """Numerical rank with the global cut RANK_CUT * sigma_max and the gap at the cut."""
        _, s, _ = self.svd(k)
        smax = float(s.max()) if s.size else 0.0
        cut = RANK_CUT * smax
        kept = s[s > cut]
        dropped = s[s <= cut]
        low = float(kept.min()) if kept.size else float("inf")
        high = float(dropped.max()) if dropped.size else 0.0
        gap = low / high if high > 0 else float("inf")
        return {"rank": int(kept.size), "sigma_max": smax, "cut": cut,
                "smallest_kept": low if kept.size else None, "largest_dropped": high,
                "gap": gap, "indeterminate": bool(kept.size and dropped.size and gap < GAP_MIN)}

    def cohomology(self) -> tuple:
        ranks = [self.stage_rank(k) for k in range(len(self.stages))]
        r = [0] + [x["rank"] for x in ranks] + [0]
        dims = [d * self.grid.points for d in self.dims()]
        h = [dims[k] - r[k + 1] - r[k] for k in range(len(dims))]
        return h, ranks

    def composition_residual(self) -> float:
        out = 0.0
        for k in range(len(self.stages) - 1):
            out = max(out, float(np.abs(self.stages[k + 1] @ self.stages[k]).max()))
        return out


# -- cohomology -------------------------------------------------------------------------

@dataclass
class CohomologyReport:
    h0_B: int
    h1_B: int
    h2_B: int
    h: list
    index_T: int
    rank_omega_cup: int
    checks: dict
    singular_values: dict
    indeterminate: bool
    method: str

    def to_dict(self) -> dict:
        return asdict(self)


def _image_and_kernel(cx: Complex, k: int):
    """Per block: orthonormal image basis of stage k and kernel basis of stage k, by the global cut."""
    u, s, vh = cx.svd(k)
    cut = cx.stage_rank(k)["cut"]
    return u, s, vh, cut


def omega_cup_rank(cx: Complex) -> int:
    """rank of f -> [omega f] from H^0_B to H^2_B (basic complex)."""
    if cx.kind != "basic":
        raise ValueError("omega cup is defined on the basic complex")
    dg = cx.algebra.dim
    om = np.kron(cx.frames[2] @ tl.omega_matrix(0) @ cx.frames[0].T, np.eye(dg))
    _, s0, vh0, cut0 = _image_and_kernel(cx, 0)
    u1, s1, _, cut1 = _image_and_kernel(cx, 1)
    images = []
    for m in range(s0.shape[0]):
        n_in = vh0.shape[-1]
        r0 = int(np.sum(s0[m] > cut0))
        ker = np.conj(vh0[m, r0:n_in]).T                   # columns span H^0 in this block
        if ker.shape[1] == 0:
            continue
        r1 = int(np.sum(s1[m] > cut1))
        img = u1[m][:, :r1]
        y = om @ ker
        y = y - img @ (np.conj(img).T @ y)
        images.append(np.linalg.svd(y, compute_uv=False))
    if not images:
        return 0
    allv = np.concatenate(images)
    return int(np.sum(allv > RANK_CUT * max(float(allv.max()), 1e-300)))


def cohomology_dims(A: Connection, cap: int = tl.DEFAULT_CAP, method: str = "auto") -> CohomologyReport:
    basic = Complex(A, "basic", cap=cap, method=method)
    quot = Complex(A, "L", cap=cap, method=method)
    hb, rb = basic.cohomology()
    hq, rq = quot.cohomology()
    h0b, h1b, h2b = hb
    idx = h0b - h1b + h2b
    cup = omega_cup_rank(basic)
    hq4 = hq + [0] * (4 - len(hq))
    checks = {
        "h1_equals_h1_B": hq4[1] == h1b,
        "omega_cup_injective": cup == h0b,
        "gysin_h0": hq4[0] == h0b,
        "gysin_h3": hq4[3] == h2b,
        "gysin_h2": hq4[2] == (h2b - h0b) + h1b,
        "index_relation": idx == h0b - h1b + h2b,
        "basic_complex_residual": basic.composition_residual(),
    }
    sv = {f"basic_{k}": r for k, r in enumerate(rb)}
    sv.update({f"L_{k}": r for k, r in enumerate(rq)})
    indeterminate = any(r["indeterminate"] for r in rb + rq)
    return CohomologyReport(h0b, h1b, h2b, hq4, idx, cup, checks, sv, indeterminate, basic.method)


# -- Hodge data ----------------------------------------------------------------------------

class HodgeData:
    """Harmonic projectors and Green operators of the basic complex per grade."""

    def __init__(self, cx: Complex, kernel_cut: float = 1e-9):
        self.cx = cx
        self.H, self.G, self.lap = [], [], []
        n = len(cx.frames)
        for k in range(n):
            blocks = 0
            if k > 0:
                d = cx.stages[k - 1]
                blocks = blocks + d @ np.conj(np.swapaxes(d, -1, -2))
            if k < n - 1:
                d = cx.stages[k]
                blocks = blocks + np.conj(np.swapaxes(d, -1, -2)) @ d
            lam, vec = np.linalg.eigh(blocks)
            cut = kernel_cut * max(float(np.abs(lam).max()), 1e-300)
            zero = np.abs(lam) <= cut
            inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, lam))
            vh = np.conj(np.swapaxes(vec, -1, -2))
            self.H.append((vec * zero[:, None, :]) @ vh)
            self.G.append((vec * inv[:, None, :]) @ vh)
            self.lap.append(blocks)
        self.harmonic_dims = [int(round(np.trace(h, axis1=1, axis2=2).real.sum())) for h in self.H]

    def _apply(self, mats, v):
        return np.einsum("mab,mb->ma", mats, v)

    def harmonic(self, k, v):
        return self._apply(self.H[k], v)

    def green(self, k, v):
        return self._apply(self.G[k], v)

    def laplacian(self, k, v):
        return self._apply(self.lap[k], v)

    def delta(self, k, v):
        """delta = D^* G on grade k, landing in grade k-1."""
        return self.cx.apply(k - 1, self.green(k, v), adjoint=True)

    def random_harmonic(self, k, rng) -> GridField:
        """Harmonic part of a random real grade-k field."""
        cx = self.cx
        f = tl.random_field(rng, cx.grid, cx.algebra, cx.grades[k], kmax=None)
        f = cx.from_vec(cx.to_vec(f, k), k)
        return cx.from_vec(self.harmonic(k, cx.to_vec(f, k)), k)


def harmonic_and_green(A: Connection, k: int, cx: Complex | None = None):
    """(H, G) as field maps on grade-k basic fields, with the underlying HodgeData."""
    cx = cx or Complex(A, "basic")
    hd = HodgeData(cx)

    def H(f):
        return cx.from_vec(hd.harmonic(k, cx.to_vec(f, k)), k)

    def G(f):
        return cx.from_vec(hd.green(k, cx.to_vec(f, k)), k)
    return H, G, hd


def basic_laplacian(hd: HodgeData, k: int):
    cx = hd.cx
    return lambda f: cx.from_vec(hd.laplacian(k, cx.to_vec(f, k)), k)


# -- Kuranishi and obstruction -----------------------------------------------------------------

def _pbracket(a: GridField, b: GridField) -> GridField:
    return tl.bracket(a, b).fiber(tl.p61_projector(), 2)


def kuranishi(hd: HodgeData, alpha: GridField) -> GridField:
    """F(alpha) = alpha + 1/2 delta p[alpha ^ alpha]."""
    cx = hd.cx
    q = cx.to_vec(_pbracket(alpha, alpha), 2)
    return alpha + cx.from_vec(hd.delta(2, q), 1) * 0.5


def kuranishi_derivative(hd: HodgeData, beta: GridField, v: GridField) -> GridField:
    cx = hd.cx
    q = cx.to_vec(_pbracket(beta, v), 2)
    return v + cx.from_vec(hd.delta(2, q), 1)


def kuranishi_inverse(hd: HodgeData, alpha: GridField, tol: float = 1e-12, max_iter: int = 30) -> GridField:
    """Solve F(beta) = alpha by Newton's method with GMRES inner solves."""
    cx = hd.cx
    fr = cx.frames[1]
    shape = (fr.shape[0], cx.algebra.dim) + cx.grid.shape

    def pack(f):
        return tl.apply_fiber(fr, f.data).reshape(-1)

    def unpack(v):
        return GridField(cx.grid, cx.algebra, 1, tl.apply_fiber(fr.T, v.reshape(shape)))

    beta = alpha
    scale = max(alpha.norm(), 1e-300)
    for _ in range(max_iter):
        r = kuranishi(hd, beta) - alpha
        if r.norm() <= tol * scale:
            return beta
        b = beta
        op = LinearOperator((pack(r).size,) * 2, matvec=lambda v: pack(kuranishi_derivative(hd, b, unpack(v))))
        step, info = gmres(op, -pack(r), rtol=1e-13, atol=0.0)
        if info != 0:
            raise KuranishiError("inner linear solve did not converge")
        beta = beta + unpack(step)
    raise KuranishiError("Newton iteration did not converge; alpha is outside the working radius")


def obstruction_psi(hd: HodgeData, alpha: GridField, tol: float = 1e-8) -> GridField:
    """Psi(alpha) = H p[F^{-1}(alpha) ^ F^{-1}(alpha)] for harmonic alpha."""
    cx = hd.cx
    v = cx.to_vec(alpha, 1)
    res = float(np.linalg.norm(v - hd.harmonic(1, v)))
    if res > tol * max(1.0, float(np.linalg.norm(v))):
        raise HarmonicInputError("alpha", res)
    beta = kuranishi_inverse(hd, alpha)
    q = cx.to_vec(_pbracket(beta, beta), 2)
    return cx.from_vec(hd.harmonic(2, q), 2)


# -- moduli Kahler data ---------------------------------------------------------------------------

def calJ_matrix() -> np.ndarray:
    """Complex structure on horizontal 1-form coefficients: calJ = -J (metric dual of Phi)."""
    from .sasaki_ops import J, is_horizontal
    return -matrix_of(lambda f: J(f) if is_horizontal(f) else f * 0, 1, 1)


def apply_calJ(alpha: GridField) -> GridField:
    if not alpha.is_horizontal(1e-12):
        raise ValueError("calJ acts on horizontal 1-forms")
    return alpha.fiber(calJ_matrix(), 1)


def apply_J_literal(alpha: GridField) -> GridField:
    return alpha.fiber(-calJ_matrix(), 1)


def kahler_form(alpha: GridField, beta: GridField) -> float:
    """Omega(alpha, beta) = 1/2 Int <alpha ^ beta> ^ eta ^ omega^2."""
    sf = structure_forms()
    return 0.5 * integrate_pairing(alpha, beta, sf.eta ^ sf.omega ^ sf.omega)


@dataclass
class ModuliRecord:
    g: float
    Omega: float
    J_alpha: GridField
    residuals: dict


def moduli_kahler_data(hd: HodgeData, alpha: GridField, beta: GridField, tol: float = 1e-8) -> ModuliRecord:
    cx = hd.cx
    for name, f in (("alpha", alpha), ("beta", beta)):
        v = cx.to_vec(f, 1)
        res = float(np.linalg.norm(v - hd.harmonic(1, v)))
        if res > tol * max(1.0, float(np.linalg.norm(v))):
            raise HarmonicInputError(name, res)
    g = tl.inner_product(alpha.horizontal(), beta.horizontal())
    om = kahler_form(alpha, beta)
    Ja, Jb = apply_calJ(alpha), apply_calJ(beta)
    vja = cx.to_vec(Ja, 1)
    res = {
        "skew": abs(om + kahler_form(beta, alpha)),
        "omega_vs_g_calJ": abs(om - tl.inner_product(alpha, Jb)),
        "omega_vs_g_J_literal": abs(om - tl.inner_product(alpha, apply_J_literal(beta))),
        "J_squared": (apply_calJ(Ja) + alpha).norm(),
        "J_closure": float(np.linalg.norm(vja - hd.harmonic(1, vja))),
        "J_invariance": abs(kahler_form(Ja, Jb) - om),
    }
    return ModuliRecord(g, om, Ja, res)


def harmonic_tangent_rep(A: Connection, alpha: GridField, lam: GridField) -> dict:
    """gamma = lam^+ + D_{A+alpha} f with lam^+ = lam - delta_T[lam ^ alpha] and
    Delta_{0, A+alpha} f = -D^*_{A+alpha} lam^+ (minimum-norm f).

    ``reducible`` flags a nonzero H^0_B at A + alpha, where f is not unique.
    """
    cx0 = Complex(A, "basic")
    hd0 = HodgeData(cx0)
    q = cx0.to_vec(_pbracket(lam, alpha), 2)
    lam_plus = lam - cx0.from_vec(hd0.delta(2, q), 1)
    B = A + alpha
    cx1 = Complex(B, "basic")
    hd1 = HodgeData(cx1)
    rhs = -cx1.apply(0, cx1.to_vec(lam_plus, 1), adjoint=True)
    f = hd1.green(0, rhs)
    gamma = lam_plus + cx1.from_vec(cx1.apply(0, f), 1)
    gauge = float(np.linalg.norm(cx1.apply(0, cx1.to_vec(gamma, 1), adjoint=True)))
    return {"gamma": gamma, "lam_plus": lam_plus, "f": cx1.from_vec(f, 0),
            "reducible": hd1.harmonic_dims[0] > 0, "gauge_residual": gauge}
