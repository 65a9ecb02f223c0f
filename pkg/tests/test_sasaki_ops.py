from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactgauge.exterior_core import I, e, hodge_star, inner, matrix_of, wedge
from contactgauge.lie_forms import random_form
from contactgauge.sasaki_ops import (
    J, L_epsilon, L_sigma, L_star_sigma, eigen_basis, eigen_split, instanton_predicates,
    is_horizontal, lambda3_decompose, pq_decompose, project_T, split_HV, structure_forms,
    transverse_star,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_structure_forms():
    sf = structure_forms()
    assert sf.sigma == e(7, 1, 4) + e(7, 2, 5) + e(7, 3, 6)
    assert sf.theta_plus == e(1, 2, 3) + e(2, 4, 6) - e(3, 4, 5) - e(1, 5, 6)
    assert sf.theta_minus == e(1, 2, 6) + e(2, 3, 4) - e(4, 5, 6) - e(1, 3, 5)
    assert sf.phi == sf.sigma + sf.theta_minus


def test_star_sigma_is_minus_half_omega_squared():
    # with vol = +e^{1..7} (fixed by the L_sigma table) the sign is negative
    sf = structure_forms()
    assert hodge_star(sf.sigma) == (sf.omega ^ sf.omega) * Fraction(-1, 2)


def test_transverse_star_of_one():
    om = structure_forms().omega
    assert transverse_star(e()) == e(1, 2, 3, 4, 5, 6)
    assert transverse_star(e()) == (om ^ om ^ om) * Fraction(-1, 6)


@pytest.mark.parametrize("i", range(1, 7))
def test_transverse_star_of_covector_via_J(i):
    om = structure_forms().omega
    assert transverse_star(e(i)) == (J(e(i)) ^ om ^ om) * Fraction(1, 2)


def test_J_squares_to_minus_one():
    for i in range(1, 7):
        assert J(J(e(i))) == -e(i)
    with pytest.raises(ValueError):
        J(e(7))


def test_epsilon_normalisation():
    sf = structure_forms()
    om3 = sf.omega ^ sf.omega ^ sf.omega
    lhs = sf.epsilon ^ sf.epsilon.conj()
    assert lhs == e(1, 2, 3, 4, 5, 6) * (I * 8)
    assert lhs == om3 * (I * I * I * Fraction(8, 6))
    # without the 2^n/n! factor the identity is off by exactly 4/3
    assert lhs == (om3 * (I * I * I)) * Fraction(4, 3)


def test_eigen_split_of_basis():
    eb, om = eigen_basis(), structure_forms().omega
    assert eigen_split(eb.v[0]).p6 == eb.v[0]
    assert eigen_split(eb.w[6]).p8 == eb.w[6]
    assert eigen_split(om).p1 == om
    assert eigen_split(e(3, 7)).pv == e(3, 7)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_eigen_split_sums_and_eigenvalues(seed):
    a = random_form(np.random.default_rng(seed), 2)
    s = eigen_split(a)
    assert s.p1 + s.p6 + s.p8 + s.pv == a
    assert L_sigma(s.p1) == s.p1 * -2
    assert L_sigma(s.p6) == -s.p6
    assert L_sigma(s.p8) == s.p8
    assert L_sigma(s.pv).is_zero()
    for x, y in [(s.p1, s.p6), (s.p6, s.p8), (s.p8, s.pv), (s.p1, s.pv)]:
        assert inner(x, y) == 0


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_L_sigma_self_adjoint(seed):
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, 2), random_form(rng, 2)
    assert inner(L_sigma(a), b) == inner(a, L_sigma(b))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(min_value=0, max_value=7))
def test_horizontal_vertical_split(seed, k):
    a = random_form(np.random.default_rng(seed), k)
    h, v = split_HV(a)
    assert h + v == a
    assert is_horizontal(h)
    assert project_T(v) == v
    assert inner(h, v) == 0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_pq_decompose_sums(seed):
    a = random_form(np.random.default_rng(seed), 2)
    parts = pq_decompose(a)
    total = sum(parts.values(), start=a * 0)
    assert total == a


def test_types_of_basis():
    eb, sf = eigen_basis(), structure_forms()
    assert set(pq_decompose(eb.w[0])) == {(1, 1)}
    assert set(pq_decompose(eb.v[0])) == {(2, 0), (0, 2)}
    assert set(pq_decompose(sf.epsilon)) == {(3, 0)}


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_lambda3_decompose_sums(seed):
    a = random_form(np.random.default_rng(seed), 3)
    a = split_HV(a)[0]
    parts = lambda3_decompose(a)
    assert sum(parts.parts(), start=a * 0) == a
    om, tp, tm = structure_forms().omega, structure_forms().theta_plus, structure_forms().theta_minus
    assert (parts.twelve ^ om).is_zero()
    assert (parts.twelve ^ tp).is_zero() and (parts.twelve ^ tm).is_zero()


def test_L_star_sigma_kernel():
    eb = eigen_basis()
    for x in eb.v + eb.w:
        assert L_star_sigma(x).is_zero()
    assert not L_star_sigma(structure_forms().omega).is_zero()


def test_L_epsilon_recorded_facts():
    eb = eigen_basis()
    v = eb.v
    for x in eb.w + (structure_forms().omega,):
        assert L_epsilon(x).is_zero()
    # not zero on Omega^2_6: v1 goes to a vertical form
    assert L_epsilon(v[0]) == e(3, 7) * 2
    computed = [L_epsilon(e(i, 7)) for i in range(1, 7)]
    assert computed == [v[4], -v[2], v[0], -v[5], v[3], -v[1]]


def test_g2_operator_spectrum():
    phi = structure_forms().phi
    m = matrix_of(lambda f: hodge_star(wedge(phi, f)), 2, 2)
    ev = np.sort(np.linalg.eigvalsh(m))
    assert np.allclose(ev[:7], -2) and np.allclose(ev[7:], 1)


def test_instanton_predicates_examples():
    eb, om = eigen_basis(), structure_forms().omega
    rep = instanton_predicates(eb.w[0])
    assert rep.sdci and rep.hym and rep.g2 and not rep.asdci
    rep = instanton_predicates(eb.v[0])
    assert rep.asdci and not rep.sdci and not rep.hym
    assert not rep.g2            # v1 ^ psi = 2 e^{123457}
    assert (eb.v[0] ^ structure_forms().psi) == e(1, 2, 3, 4, 5, 7) * 2
    rep = instanton_predicates(om)
    assert not (rep.sdci or rep.asdci or rep.hym)


def test_instanton_predicates_float_tolerance():
    w = eigen_basis().w[2].to_float()
    assert instanton_predicates(w + e(1, 7).to_float() * 1e-13, tol=1e-10).sdci
    assert not instanton_predicates(w + e(1, 7).to_float() * 1e-6, tol=1e-10).sdci
