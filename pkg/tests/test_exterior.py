import numpy as np
import pytest

from common.errors import DegenerateFormError, DegreeError
from core.exterior import (
    Form,
    exterior_d,
    exterior_d_matrix,
    hodge_star,
    inner_product,
    interior,
    lambda_contract,
    wedge,
)
from core.hitchin import ADAPTED_PHI, ADAPTED_PHI_HAT, STANDARD_OMEGA
from tests.conftest import random_form

e = Form.basis


def test_basis_reorders_with_sign():
    assert e(2, 1) == -e(1, 2)
    assert e(3, 1, 2) == e(1, 2, 3)
    assert e(1, 1).is_zero()


def test_wedge_basic_products():
    assert wedge(e(1), e(2)) == e(1, 2)
    assert wedge(e(2), e(1)) == -e(1, 2)
    assert wedge(e(1, 3), e(2)) == -e(1, 2, 3)
    assert wedge(e(1), e(1, 2)).is_zero()


def test_wedge_degree_overflow():
    with pytest.raises(DegreeError):
        wedge(e(1, 2, 3, 4), e(5, 6, 1))


def test_graded_commutativity_on_random_forms(rng):
    for _ in range(200):
        k, l = rng.integers(0, 4, size=2)
        a, b = random_form(rng, int(k)), random_form(rng, int(l))
        assert wedge(a, b).allclose((-1) ** (k * l) * wedge(b, a), tol=1e-12)


def test_interior_is_antiderivation(rng):
    v = rng.standard_normal(6)
    for _ in range(50):
        k = int(rng.integers(1, 4))
        a, b = random_form(rng, k), random_form(rng, 2)
        left = interior(v, wedge(a, b))
        right = wedge(interior(v, a), b) + (-1) ** k * wedge(a, interior(v, b))
        assert left.allclose(right, tol=1e-12)


def test_wedge_is_associative(rng):
    for _ in range(200):
        k, l, m = (int(x) for x in rng.integers(0, 3, size=3))
        a, b, c = random_form(rng, k), random_form(rng, l), random_form(rng, m)
        assert wedge(wedge(a, b), c).allclose(wedge(a, wedge(b, c)), tol=1e-12)


def test_interior_of_basis():
    assert interior(1, e(1, 2)) == e(2)
    assert interior(2, e(1, 2)) == -e(1)
    assert interior(4, e(1, 2, 3)).is_zero()
    with pytest.raises(DegreeError):
        interior(7, e(1, 2))


def test_adapted_pair_is_positively_oriented():
    assert wedge(ADAPTED_PHI, ADAPTED_PHI_HAT).allclose(e(1, 2, 3, 4, 5, 6))


def test_lambda_of_omega(standard_frame):
    assert lambda_contract(STANDARD_OMEGA, standard_frame).allclose(Form.scalar(3.0))


def test_lambda_of_xi_wedge_phi_hat(standard_frame):
    result = lambda_contract(wedge(e(1), ADAPTED_PHI_HAT), standard_frame)
    assert result.allclose(0.5 * (e(3, 5) - e(4, 6)))


def test_lambda_on_nilmanifold_rhs_shape(standard_frame):
    b = 0.3
    inner = e(3, 4) + 2 * b * e(3, 5) - e(5, 6)
    result = lambda_contract(4 * wedge(e(1, 2), inner), standard_frame)
    assert result.allclose(4 * inner)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_lefschetz_commutator(rng, standard_frame, k):
    for _ in range(10):
        beta = random_form(rng, k, density=0.7)
        left = lambda_contract(wedge(STANDARD_OMEGA, beta), standard_frame)
        right = (3 - k) * beta
        if k >= 2:
            right = right + wedge(STANDARD_OMEGA, lambda_contract(beta, standard_frame))
        assert left.allclose(right, tol=1e-12)


def test_d_squared_vanishes_on_presets(rng, nil, solv):
    for preset in (nil, solv):
        frame = preset.frame
        for k in range(0, 5):
            a = random_form(rng, k)
            assert exterior_d(exterior_d(a, frame), frame).is_zero(tol=1e-12)


def test_d_is_a_graded_derivation(rng, nil, solv):
    for preset in (nil, solv):
        frame = preset.frame
        for _ in range(50):
            k, l = (int(x) for x in rng.integers(0, 3, size=2))
            a, b = random_form(rng, k), random_form(rng, l)
            left = exterior_d(wedge(a, b), frame)
            right = wedge(exterior_d(a, frame), b) + (-1) ** k * wedge(a, exterior_d(b, frame))
            assert left.allclose(right, tol=1e-12)


def test_solvmanifold_differentials(solv):
    lam = solv.lam
    d = exterior_d(e(3, 5), solv.frame)
    assert d.allclose(lam * e(3, 5, 6))


def test_nilmanifold_ansatz_is_closed(nil):
    for params in [(0.0, 0.0), (0.4, -0.3)]:
        assert exterior_d(nil.ansatz.form(params), nil.frame).is_zero(tol=1e-14)


def test_dense_d_matches_symbolic(rng, solv):
    frame = solv.frame
    a = random_form(rng, 2, density=0.8)
    dense = a.to_vector() @ exterior_d_matrix(frame, 2)
    assert np.allclose(dense, exterior_d(a, frame).to_vector())


def test_inner_product_adapted_components(rng):
    for _ in range(20):
        gamma = random_form(rng, 2, density=0.8, indices=(3, 4, 5, 6))
        left = inner_product(wedge(e(1), gamma), ADAPTED_PHI, np.eye(6))
        right = 0.5 * inner_product(gamma, e(3, 5) - e(4, 6), np.eye(6))
        assert left == pytest.approx(right, abs=1e-12)


def test_inner_product_rejects_bad_gram():
    g = np.eye(6)
    g[0, 1] = 0.5
    with pytest.raises(DegenerateFormError):
        inner_product(e(1), e(2), g)
    with pytest.raises(DegreeError):
        inner_product(e(1), e(1, 2), np.eye(6))


def test_hodge_star_of_adapted_form(standard_frame):
    assert hodge_star(ADAPTED_PHI, np.eye(6), standard_frame).allclose(ADAPTED_PHI_HAT, tol=1e-12)


def test_hodge_star_norm_identity(rng, standard_frame):
    A = rng.standard_normal((6, 6))
    g = A @ A.T + 6 * np.eye(6)
    vol = np.sqrt(np.linalg.det(g))
    for k in range(1, 4):
        a = random_form(rng, k, density=0.8)
        top = wedge(a, hodge_star(a, g, standard_frame)).coefficient((1, 2, 3, 4, 5, 6))
        assert top == pytest.approx(inner_product(a, a, g) * vol, rel=1e-10)


def test_text_and_json_forms():
    phi = 2.0 * e(1, 3, 5) - 0.5 * e(2, 4, 6)
    assert "e^{135}" in phi.to_text()
    assert Form.from_json(phi.to_json()) == phi
