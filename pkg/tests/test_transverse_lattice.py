import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactgauge.exterior_core import e, hodge_star, matrix_of, wedge
from contactgauge.lie_forms import LieForm, abelian, su2
from contactgauge.sasaki_ops import structure_forms
from contactgauge.transverse_lattice import (
    Connection, Grid, GridField, GridMismatch, L_omega, Lambda, D_T, D_T_adjoint, D_V,
    SizeCapExceeded, adjoint, assemble, bracket, cov_d, cov_d_adjoint, curvature,
    curvature_identity_residuals, d7_extended, d7_extended_stated_adjoint, ext_d,
    ext_d_adjoint, fiber_frame, inner_product, kahler_identity_residuals,
    lambda_formula_residuals, load_field, nb, operator, random_connection, random_field,
    save_field, star, transverse_identity_residuals, transverse_star,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
G3 = Grid(3)
G5 = Grid(5)


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1)
    with pytest.raises(ValueError):
        Grid(3, "upwind")


def test_d_of_eta_is_omega():
    tau = [1.0, 0.0, 0.0]
    f = GridField.constant(G3, su2(), LieForm.tensor(su2(), tau, e(7)))
    want = GridField.constant(G3, su2(), LieForm.tensor(su2(), tau, structure_forms().omega))
    assert (ext_d(f) - want).norm() == 0.0


def test_d_of_scalar_is_gradient():
    x = np.arange(G5.n) / G5.n
    h = np.sin(2 * np.pi * x)
    data = np.zeros((1, 1) + G5.shape)
    data[0, 0] = h[:, None, None, None, None, None]
    df = ext_d(GridField(G5, abelian(1), 0, data))
    want = np.zeros((7, 1) + G5.shape)
    want[0, 0] = (2 * np.pi * np.cos(2 * np.pi * x))[:, None, None, None, None, None]
    assert np.abs(df.data - want).max() < 1e-12


@pytest.mark.parametrize("mode", ["spectral", "central"])
@pytest.mark.parametrize("k", range(6))
def test_d_squared_vanishes(mode, k):
    g = Grid(4, mode)
    f = random_field(np.random.default_rng(k), g, su2(), k, kmax=None)
    assert ext_d(ext_d(f)).norm() <= 1e-12 * max(1.0, f.norm())


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=6))
def test_cov_d_adjointness(seed, k):
    rng = np.random.default_rng(seed)
    A = random_connection(rng, G3, su2(), kmax=None)
    a = random_field(rng, G3, su2(), k, kmax=None)
    b = random_field(rng, G3, su2(), k + 1, kmax=None)
    assert _rel(inner_product(cov_d(A, a), b), inner_product(a, cov_d_adjoint(A, b))) <= 1e-10
    assert _rel(inner_product(ext_d(a), b), inner_product(a, ext_d_adjoint(b))) <= 1e-10


@pytest.mark.parametrize("tag", ["d_A", "D_T", "D_V", "d7", "d7_projected", "L_omega"])
def test_registered_adjoints(tag):
    rng = np.random.default_rng(11)
    A = random_connection(rng, G3, su2(), kmax=None)
    k = {"d_A": 1, "D_T": 1, "D_V": 1, "d7": 1, "d7_projected": 1, "L_omega": 2}[tag]
    horizontal = tag in ("D_T", "D_V")
    fwd, adj = operator(tag, A)
    a = random_field(rng, G3, su2(), k, kmax=None, horizontal=horizontal)
    y = fwd(a)
    b = random_field(rng, G3, su2(), y.grade, kmax=None, horizontal=horizontal)
    assert _rel(inner_product(y, b), inner_product(a, adj(b))) <= 1e-10
    assert adjoint(tag, A) is not None
    with pytest.raises(KeyError):
        operator("curl", A)


def test_D_V_is_skew_adjoint():
    rng = np.random.default_rng(2)
    A = random_connection(rng, G3, su2(), kmax=None)
    f = random_field(rng, G3, su2(), 2, kmax=None, horizontal=True)
    assert (adjoint("D_V", A)(f) + D_V(A, f)).norm() <= 1e-12 * f.norm()


def test_D_T_adjoint_against_transverse_stars():
    rng = np.random.default_rng(4)
    A = random_connection(rng, G3, su2(), kmax=None)
    A = Connection.from_parts(A.a_h, A.a_eta * 0.0)
    for k in (1, 2, 3):
        y = random_field(rng, G3, su2(), k, kmax=None, horizontal=True)
        lhs = D_T_adjoint(A, y)
        rhs = -transverse_star(D_T(A, transverse_star(y)))
        assert (lhs - rhs).norm() <= 1e-10 * y.norm()


def test_d7_adjoint_is_star_d7_star():
    rng = np.random.default_rng(5)
    A = random_connection(rng, G3, su2(), kmax=None)
    y = random_field(rng, G3, su2(), 6, kmax=None)
    a = random_field(rng, G3, su2(), 1, kmax=None)
    lhs = inner_product(d7_extended(A, a), y)
    assert _rel(lhs, inner_product(a, d7_extended_stated_adjoint(A, y))) <= 1e-10


def test_curvature_square_identity():
    # d_A^2 f = [F ^ f]; the other order differs by (-1)^{pq+1}
    rng = np.random.default_rng(0)
    A = random_connection(rng, G5, su2())
    for k in (0, 1, 2):
        f = random_field(rng, G5, su2(), k)
        res = curvature_identity_residuals(A, f)
        assert res["F_wedge_f"] <= 1e-10
        if k % 2 == 0:
            assert res["f_wedge_F"] > 1.0


def test_flat_connection_curvature():
    A = Connection.zero(G3, su2())
    assert curvature(A).norm() == 0.0
    c = 0.3
    f = GridField.constant(G3, abelian(1), LieForm.tensor(abelian(1), [c], e(7)))
    want = GridField.constant(G3, abelian(1), LieForm.tensor(abelian(1), [c], structure_forms().omega))
    assert (curvature(Connection(f)) - want).norm() <= 1e-15


def test_transverse_identities_at_flat_connection():
    f = random_field(np.random.default_rng(1), G5, su2(), 0)
    res = transverse_identity_residuals(Connection.zero(G5, su2()), f)
    assert res["square_stated"] <= 1e-10 and res["commute_stated"] <= 1e-10


def test_transverse_identities_need_curvature_terms():
    rng = np.random.default_rng(0)
    A = random_connection(rng, G5, su2())
    f = random_field(rng, G5, su2(), 0)
    res = transverse_identity_residuals(A, f)
    assert res["square_corrected"] <= 1e-10 and res["commute_corrected"] <= 1e-10
    assert res["square_stated"] > 1e-3 and res["commute_stated"] > 1e-3


def test_D_V_without_reeb_component():
    rng = np.random.default_rng(3)
    A = random_connection(rng, G3, su2(), kmax=None)
    A = Connection.from_parts(A.a_h, A.a_eta * 0.0)
    f = random_field(rng, G3, su2(), 1, kmax=None, horizontal=True)
    assert D_V(A, f).norm() <= 1e-12 * f.norm()
    assert (D_T(A, f) - cov_d(A, f)).norm() <= 1e-12 * f.norm()


def test_D_V_is_bracket_with_reeb_component():
    rng = np.random.default_rng(6)
    tau = np.array([0.2, -0.5, 0.7])
    data = np.zeros((7, 3) + G3.shape)
    data[6] = tau[:, None, None, None, None, None, None]
    A = Connection(GridField(G3, su2(), 1, data))
    f = random_field(rng, G3, su2(), 0, kmax=None)
    assert (D_V(A, f) - bracket(A.a_eta, f)).norm() <= 1e-12 * f.norm()


def test_inner_product_examples():
    tau_omega = GridField.constant(G3, abelian(1), LieForm.tensor(abelian(1), [1], structure_forms().omega))
    assert inner_product(tau_omega, tau_omega) == pytest.approx(3.0, abs=1e-14)
    rng = np.random.default_rng(0)
    f = random_field(rng, G3, su2(), 2, kmax=None)
    assert abs(inner_product(f.horizontal(), f.vertical())) <= 1e-14
    assert inner_product(f * 0.0, f) == 0.0


def test_star_is_transverse_star_wedge_eta():
    rng = np.random.default_rng(8)
    for k in range(7):
        f = random_field(rng, G3, su2(), k, kmax=None, horizontal=True)
        lhs = star(f)
        m = matrix_of(lambda x: wedge(x, e(7)), 6 - k, 7 - k)
        assert (lhs - transverse_star(f).fiber(m, 7 - k)).norm() <= 1e-14 * f.norm()
    assert np.allclose(matrix_of(hodge_star, 3, 4).T @ matrix_of(hodge_star, 3, 4), np.eye(35))


def test_lambda_is_pointwise_transpose_and_sign_alternates():
    rng = np.random.default_rng(9)
    a = random_field(rng, G3, su2(), 2, kmax=None)
    b = random_field(rng, G3, su2(), 4, kmax=None)
    assert _rel(inner_product(L_omega(a), b), inner_product(a, Lambda(b))) <= 1e-12
    res = lambda_formula_residuals(G3, abelian(1))
    for k, r in res.items():
        # Lambda = -(-1)^k *_T L_omega *_T on horizontal degree-k forms
        assert (r["stated"] if k % 2 else r["negated"]) <= 1e-12
        assert (r["negated"] if k % 2 else r["stated"]) > 0.5


def test_kahler_identities_on_basic_fields():
    res = kahler_identity_residuals(Grid(4), n_fields=100)
    for key in ("iii", "iv", "v", "i_corrected", "ii_corrected"):
        assert res[key] <= 1e-9
    assert res["i_stated"] > 1.0 and res["ii_stated"] > 1.0


def test_assembled_matrix_matches_matrix_free():
    g = Grid(2)
    rng = np.random.default_rng(0)
    A = random_connection(rng, g, su2(), kmax=None)
    f0, f1 = fiber_frame("F0"), fiber_frame("F1")
    m = assemble(lambda f: cov_d(A, f), g, su2(), 0, f0, f1, 1)
    f = random_field(rng, g, su2(), 0, kmax=None)
    want = cov_d(A, f).data.reshape(-1)
    assert np.abs(m @ f.data.reshape(-1) - want).max() <= 1e-12
    z = assemble(lambda f: f * 0.0, g, su2(), 0, f0, f0, 0)
    assert not z.any()


def test_assembled_composition_vanishes_for_flat_connection():
    g = Grid(2)
    A = Connection.zero(g, su2())
    f0, f1, f2 = (fiber_frame(f"F{k}") for k in range(3))
    d0 = assemble(lambda f: cov_d(A, f), g, su2(), 0, f0, f1, 1)
    d1 = assemble(lambda f: cov_d(A, f), g, su2(), 1, f1, f2, 2, cap=10**7)
    assert np.abs(d1 @ d0).max() <= 1e-12


def test_size_cap():
    g = Grid(3)
    with pytest.raises(SizeCapExceeded):
        assemble(lambda f: f, g, su2(), 2, fiber_frame("F2"), fiber_frame("F2"), 2, cap=1000)


def test_grid_mismatch():
    a = GridField.zeros(Grid(3), su2(), 1)
    b = GridField.zeros(Grid(4), su2(), 1)
    with pytest.raises(GridMismatch):
        a + b
    with pytest.raises(ValueError):
        GridField(Grid(3), su2(), 1, np.zeros((nb(2), 3) + Grid(3).shape))


def test_snapshot_roundtrip(tmp_path):
    f = random_field(np.random.default_rng(12), G3, su2(), 3, kmax=None)
    save_field(f, tmp_path / "f.json")
    g = load_field(tmp_path / "f.json")
    assert g.grade == 3 and g.grid == f.grid and g.algebra.name == f.algebra.name
    assert np.array_equal(g.data, f.data)


def test_ideal_is_stable_under_cov_d():
    rng = np.random.default_rng(1)
    A = random_connection(rng, G5, su2())
    for k in (2, 3):
        q = fiber_frame(f"L{k}")
        f = random_field(rng, G5, su2(), k).fiber(np.eye(nb(k)) - q.T @ q, k)
        q1 = fiber_frame(f"L{k + 1}")
        assert cov_d(A, f).fiber(q1.T @ q1, k + 1).norm() <= 1e-12 * f.norm()
