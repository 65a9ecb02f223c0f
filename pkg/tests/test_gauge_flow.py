import json

import numpy as np
import pytest

from contactgauge import transverse_lattice as tl
from contactgauge.exterior_core import e
from contactgauge.gauge_flow import (
    Complex, FlowConfig, HarmonicInputError, HodgeData, KuranishiError, bianchi_residual,
    bound_chain, calJ_matrix, charge_gauge_variation, charge_kappa, charge_variation_corrected,
    chern_simons, cohomology_dims, complex_property_residual, curvature, d7_route_residual,
    endpoint_split, energy_decomposition, harmonic_tangent_rep, kuranishi, kuranishi_inverse,
    moduli_kahler_data, obstruction_psi, pointwise_predicates, sdci_flow,
)
from contactgauge.lie_forms import LieForm, abelian, su2
from contactgauge.sasaki_ops import J, structure_forms

G3 = tl.Grid(3)
G5 = tl.Grid(5)


def _reeb_connection(c, grid=G3):
    return tl.Connection(tl.GridField.constant(grid, abelian(1), LieForm.tensor(abelian(1), [c], e(7))))


@pytest.fixture(scope="module")
def flat_su2():
    A = tl.Connection.zero(G3, su2())
    return A, HodgeData(Complex(A, "basic"))


def test_reeb_connection_energy_split():
    # F = c omega lies in Omega^2_1, so F+ = -c/2 omega and F- = 3c/2 omega
    c = 0.4
    rec = energy_decomposition(_reeb_connection(c))
    assert rec.ym == pytest.approx(3 * c * c, abs=1e-14)
    assert rec.h_plus == pytest.approx(3 * c * c / 4, abs=1e-14)
    assert rec.h_minus == pytest.approx(27 * c * c / 4, abs=1e-14)
    assert rec.vertical == 0.0
    # the cross terms of the +-1 split do not cancel on Omega^2_1
    assert rec.residual == pytest.approx(1.5 * rec.omega1, abs=1e-14)


def test_energy_residual_is_three_halves_of_omega1_part():
    A = tl.random_connection(np.random.default_rng(0), G3, su2(), amplitude=0.5)
    rec = energy_decomposition(A)
    assert abs(rec.residual - 1.5 * rec.omega1) <= 1e-10 * rec.ym


def test_kappa_is_difference_of_selfdual_energies():
    rng = np.random.default_rng(1)
    for _ in range(3):
        A = tl.random_connection(rng, G3, su2(), kmax=None, amplitude=0.5)
        rec = energy_decomposition(A)
        assert abs(charge_kappa(A) - (rec.h_plus - rec.h_minus)) <= 1e-10 * rec.ym


def test_kappa_of_reeb_connection_by_quadrature():
    # kappa = c^2 Int omega^2 ^ sigma = -6 c^2 on the unit-volume torus
    c = 0.4
    sf = structure_forms()
    top = sf.omega ^ sf.omega ^ sf.sigma
    assert top == e(1, 2, 3, 4, 5, 6, 7) * -6
    assert charge_kappa(_reeb_connection(c)) == pytest.approx(-6 * c * c, abs=1e-14)


def test_bound_chain_fails_for_reeb_connection():
    b = bound_chain(_reeb_connection(0.4))
    assert b["h_plus_le_ym"] and not b["kappa_le_h_plus"]


def test_bianchi_identity():
    A = tl.random_connection(np.random.default_rng(2), G5, su2(), amplitude=0.5)
    assert bianchi_residual(A) <= 1e-10 * max(1.0, curvature(A).norm())
    assert curvature(tl.Connection.zero(G3, su2())).norm() == 0.0


def test_gauge_variation_of_kappa():
    rng = np.random.default_rng(0)
    A = tl.random_connection(rng, G5, su2(), amplitude=0.5)
    alpha = tl.random_field(rng, G5, su2(), 1, amplitude=0.1)
    assert abs(charge_variation_corrected(A, alpha)) <= 1e-10
    assert abs(charge_gauge_variation(A, alpha)) > 1e-3


def test_chern_simons_is_quadratic_for_abelian():
    rng = np.random.default_rng(3)
    A0 = tl.Connection.zero(G3, abelian(1))
    a = tl.random_field(rng, G3, abelian(1), 1, kmax=None)
    assert chern_simons(A0, a * 2.0) == pytest.approx(4 * chern_simons(A0, a), rel=1e-12)
    assert chern_simons(A0, a * 0.0) == 0.0


def test_d7_complex_property_and_route_gap():
    rng = np.random.default_rng(4)
    A = tl.random_connection(rng, G5, su2(), amplitude=0.5)
    f = tl.random_field(rng, G5, su2(), 0)
    assert complex_property_residual(A, f) <= 1e-10
    alpha = tl.random_field(rng, G5, su2(), 1)
    assert d7_route_residual(A, alpha) > 0.1 * alpha.norm()


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(direction="newton")
    with pytest.raises(ValueError):
        FlowConfig(shrink=1.5)


@pytest.mark.parametrize("direction", ["lbfgs", "gradient"])
def test_flow_energy_is_monotone(direction):
    A0 = tl.random_connection(np.random.default_rng(7), G3, su2(), kmax=None, amplitude=0.1)
    st = sdci_flow(A0, FlowConfig(max_iter=15, direction=direction))
    h = st.energy_history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert h[-1] < h[0]


def test_flow_stops_at_max_iter(tmp_path):
    A0 = tl.random_connection(np.random.default_rng(7), G3, su2(), kmax=None, amplitude=0.1)
    st = sdci_flow(A0, FlowConfig(max_iter=1))
    assert st.status == "max_iter" and not st.converged
    assert len(st.energy_history) == 2
    st.to_json(tmp_path / "s.json")
    assert json.loads((tmp_path / "s.json").read_text())["status"] == "max_iter"
    st.to_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "iteration,energy"


def test_flow_from_instanton_converges_immediately():
    st = sdci_flow(tl.Connection.zero(G3, su2()))
    assert st.converged and st.iteration == 0


def test_endpoint_split_of_reeb_connection():
    s = endpoint_split(_reeb_connection(0.5))
    assert max(s["p6"], s["p8"], s["pv"]) <= 1e-15
    assert s["p1"] == pytest.approx(s["total"])


def test_pointwise_predicates_agree_with_exact_oracle():
    A = tl.random_connection(np.random.default_rng(5), G3, su2(), amplitude=0.3)
    rep = pointwise_predicates(A)
    assert rep["oracle_discrepancy"] <= 1e-12
    assert not rep["holds_everywhere"]["sdci"]
    flat = pointwise_predicates(tl.Connection.zero(G3, su2()))
    assert all(flat["holds_everywhere"].values())


def test_cohomology_of_abelian_flat_connection():
    rep = cohomology_dims(tl.Connection.zero(G3, abelian(1)))
    assert (rep.h0_B, rep.h1_B) == (1, 6)
    assert rep.index_T == rep.h0_B - rep.h1_B + rep.h2_B
    assert rep.checks["h1_equals_h1_B"] and rep.checks["omega_cup_injective"]
    assert not rep.indeterminate


def test_dense_and_mode_complexes_agree():
    # at N = 2 every derivative symbol is the zeroed Nyquist mode, so this is fiber algebra only
    A = tl.Connection.zero(tl.Grid(2), abelian(1))
    a = Complex(A, "basic", method="modes").cohomology()[0]
    b = Complex(A, "basic", method="dense", cap=10**8).cohomology()[0]
    assert a == b


def test_size_cap_is_enforced():
    A = tl.random_connection(np.random.default_rng(0), tl.Grid(3), su2(), kmax=None)
    with pytest.raises(tl.SizeCapExceeded):
        Complex(A, "basic", cap=10**4)


def test_kuranishi_derivative_at_zero_is_identity(flat_su2):
    A, hd = flat_su2
    v = tl.random_field(np.random.default_rng(0), G3, su2(), 1, kmax=None).horizontal()
    h = 1e-4
    fd = (kuranishi(hd, v * h) - kuranishi(hd, v * -h)) * (1 / (2 * h))
    assert (fd - v).norm() <= 1e-6 * v.norm()


def test_kuranishi_scales_quadratically(flat_su2):
    A, hd = flat_su2
    cx = hd.cx
    a = tl.random_field(np.random.default_rng(1), G3, su2(), 1, kmax=None, amplitude=0.3)
    a = cx.from_vec(cx.to_vec(a, 1), 1)
    r1 = (kuranishi(hd, a) - a).norm()
    r2 = (kuranishi(hd, a * 0.5) - a * 0.5).norm()
    assert r1 / r2 == pytest.approx(4.0, rel=1e-8)
    beta = kuranishi_inverse(hd, kuranishi(hd, a))
    assert (beta - a).norm() <= 1e-9 * a.norm()


def test_kuranishi_inverse_reports_failure(flat_su2):
    A, hd = flat_su2
    a = tl.random_field(np.random.default_rng(1), G3, su2(), 1, kmax=None, amplitude=0.3)
    with pytest.raises(KuranishiError):
        kuranishi_inverse(hd, a, max_iter=0)


def test_obstruction_scaling_and_abelian_vanishing(flat_su2):
    A, hd = flat_su2
    rng = np.random.default_rng(2)
    a = hd.random_harmonic(1, rng) * 0.3
    p1 = obstruction_psi(hd, a).norm()
    p2 = obstruction_psi(hd, a * 0.5).norm()
    assert p1 > 0 and p2 / p1 == pytest.approx(0.25, rel=1e-6)
    with pytest.raises(HarmonicInputError):
        obstruction_psi(hd, tl.random_field(rng, G3, su2(), 1, kmax=None))
    Ab = tl.Connection.zero(G3, abelian(3))
    hdb = HodgeData(Complex(Ab, "basic"))
    assert obstruction_psi(hdb, hdb.random_harmonic(1, rng)).norm() == 0.0


def test_calJ_is_minus_J():
    m = calJ_matrix()
    for i in range(1, 7):
        col = np.zeros(7)
        col[i - 1] = 1.0
        want = -np.array([float(J(e(i)).coeff((j,))) for j in range(1, 8)])
        assert np.allclose(m @ col, want)
    assert not m[:, 6].any()


def test_moduli_kahler_data(flat_su2):
    A, hd = flat_su2
    rng = np.random.default_rng(3)
    a, b = hd.random_harmonic(1, rng), hd.random_harmonic(1, rng)
    rec = moduli_kahler_data(hd, a, b)
    r = rec.residuals
    assert r["skew"] <= 1e-10 and r["omega_vs_g_calJ"] <= 1e-9
    assert r["J_squared"] <= 1e-9 and r["J_closure"] <= 1e-8
    assert r["omega_vs_g_J_literal"] > 1e-3 * max(abs(rec.Omega), 1e-300)
    with pytest.raises(HarmonicInputError):
        moduli_kahler_data(hd, tl.random_field(rng, G3, su2(), 1, kmax=None), b)


def test_harmonic_tangent_rep(flat_su2):
    A, hd = flat_su2
    rng = np.random.default_rng(4)
    lam = hd.random_harmonic(1, rng)
    out = harmonic_tangent_rep(A, lam * 0.0, lam)
    assert (out["gamma"] - lam).norm() <= 1e-12 * lam.norm()
    assert out["reducible"]
    alpha = hd.random_harmonic(1, rng) * 0.05
    out = harmonic_tangent_rep(A, alpha, lam)
    assert out["gauge_residual"] <= 1e-10 * lam.norm()
    assert not out["reducible"]

