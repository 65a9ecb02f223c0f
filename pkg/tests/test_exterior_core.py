from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactgauge.exterior_core import (
    FULL, Form, GaussianRational, I, TowerMismatch, basis_masks, compat_residual, contract,
    coordinates, e, from_coordinates, hodge_star, inner, matrix_of, scalar, volume, wedge,
)
from contactgauge.lie_forms import random_form
from contactgauge.sasaki_ops import structure_forms

seeds = st.integers(min_value=0, max_value=2**32 - 1)
grades = st.integers(min_value=0, max_value=7)


def test_blade_sign_and_repeat():
    assert e(2, 1) == -e(1, 2)
    assert e(1, 1).is_zero()
    assert e(3, 1, 2) == e(1, 2, 3)


def test_gaussian_rational_arithmetic():
    assert I * I == -1
    z = GaussianRational(Fraction(1, 2), 3)
    assert z * z.conjugate() == Fraction(1, 4) + 9
    assert (z / z) == 1
    assert complex(z) == 0.5 + 3j


def test_tower_mismatch_raises():
    with pytest.raises(TowerMismatch):
        e(1) + e(2) * 0.5


def test_volume_is_minus_eta_omega_cubed():
    sf = structure_forms()
    om3 = sf.omega ^ sf.omega ^ sf.omega
    assert volume() == Form({FULL: 1})
    assert volume() == (sf.eta ^ om3) * Fraction(-1, 6)


def test_contraction_sign():
    assert contract(7, e(1, 7)) == -e(1)
    assert contract(7, e(7, 1)) == e(1)
    assert contract(3, e(1, 2)).is_zero()


def test_scalar_and_render():
    assert scalar(3).render() == "3"
    assert (e(1, 2) * Fraction(-1, 2) + e(3)).render() == "e^{3} - 1/2 e^{12}"


@settings(max_examples=40, deadline=None)
@given(seeds, grades, grades, grades)
def test_wedge_associative(seed, p, q, r):
    rng = np.random.default_rng(seed)
    a, b, c = (random_form(rng, k) for k in (p, q, r))
    assert wedge(wedge(a, b), c) == wedge(a, wedge(b, c))


@settings(max_examples=40, deadline=None)
@given(seeds, grades, grades)
def test_wedge_graded_commutative(seed, p, q):
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, p), random_form(rng, q)
    assert wedge(a, b) == wedge(b, a) * (-1) ** (p * q)


@settings(max_examples=40, deadline=None)
@given(seeds, grades)
def test_star_defines_inner_product(seed, k):
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, k), random_form(rng, k)
    assert wedge(a, hodge_star(b)) == volume() * inner(a, b)
    assert hodge_star(hodge_star(a)) == a


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(min_value=1, max_value=7), grades, grades)
def test_contraction_is_antiderivation(seed, i, p, q):
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, p), random_form(rng, q)
    lhs = contract(i, wedge(a, b))
    rhs = wedge(contract(i, a), b) + wedge(a, contract(i, b)) * (-1) ** p
    assert lhs == rhs


@pytest.mark.parametrize("k", range(8))
def test_compatibility_with_eta_on_blades(k):
    for m in basis_masks(k):
        assert compat_residual(Form({m: 1})).is_zero()


def test_coordinates_roundtrip_and_matrix():
    rng = np.random.default_rng(3)
    a = random_form(rng, 3)
    assert from_coordinates(coordinates(a, 3), 3) == a
    m = matrix_of(hodge_star, 2, 5)
    assert m.shape == (21, 21)
    assert np.allclose(m @ m.T, np.eye(21))


def test_float_forms_work_with_linear_operations():
    a = e(1, 2).to_float() * 0.25
    assert hodge_star(a).norm() == pytest.approx(0.25)
    assert a.tower == "R"
