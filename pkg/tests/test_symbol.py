import numpy as np
import pytest

from common.errors import DegenerateFormError
from core.exterior import Form
from core.flows import FlowSpec, Weight
from core.hitchin import ADAPTED_PHI, TypeIIAStructure, lambda_invariant
from core.symbol import (
    NAMED_BASIS,
    SymbolProblem,
    constraint_space,
    finite_difference_dual,
    linearized_dual,
    symbol_spectrum,
)


def _spectrum(spec=None, xi=None):
    return symbol_spectrum(SymbolProblem.canonical(spec, xi))


def test_hitchin_symbol_in_standard_basis():
    report = _spectrum()
    assert report.labels == [label for label, _ in NAMED_BASIS]
    assert np.allclose(report.matrix, np.diag([1.0, 0.0, 1.0, 1.0, 0.0]), atol=1e-12)
    assert np.allclose(report.eigenvalues, [0.0, 0.0, 1.0, 1.0, 1.0], atol=1e-12)
    assert report.kernel_dimension == 2
    assert report.closure_residual < 1e-12
    kernel = [label for label, value in zip(report.labels, np.diag(report.matrix)) if abs(value) < 1e-12]
    assert kernel == ["mu1+", "mu2-"]


@pytest.mark.parametrize(
    "spec, expected",
    [
        (FlowSpec(weight=Weight.TYPE_IIA), [0.0, 1 / 16, 1 / 16, 1 / 16, 1 / 16]),
        (FlowSpec(weight=Weight.DUAL_RICCI), [0.0, 0.0, 0.0, 0.0, 1.0]),
        (FlowSpec(weight=Weight.EPSILON, epsilon=0.5), [0.0, 0.25, 1.0, 1.0, 1.0]),
    ],
)
def test_weighted_spectra(spec, expected):
    report = _spectrum(spec)
    assert np.allclose(report.eigenvalues, expected, atol=1e-12)


def test_type_iia_kernel_is_one_dimensional():
    assert _spectrum(FlowSpec(weight=Weight.TYPE_IIA)).kernel_dimension == 1


def test_spectrum_does_not_depend_on_direction():
    report = _spectrum(xi=[0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    assert not constraint_space(SymbolProblem.canonical(xi=[0, 0, 1.0, 0, 0, 0])).in_named_basis
    assert np.allclose(np.sort(report.eigenvalues.real), [0.0, 0.0, 1.0, 1.0, 1.0], atol=1e-10)


def test_symbol_is_quadratic_in_xi():
    report = _spectrum(xi=[2.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert np.allclose(report.eigenvalues, [0.0, 0.0, 4.0, 4.0, 4.0], atol=1e-10)


def test_spectrum_at_non_adapted_base_point(nil):
    structure = TypeIIAStructure.build(nil.ansatz.form((0.3, 0.2)), nil.frame)
    report = symbol_spectrum(SymbolProblem(structure, np.array([0.0, 1.0, 0.5, 0.0, 0.0, 0.0])))
    values = np.sort(report.eigenvalues.real)
    assert np.allclose(values / values[-1], [0.0, 0.0, 1.0, 1.0, 1.0], atol=1e-9)
    assert report.closure_residual < 1e-10


def test_zero_covector_is_rejected():
    with pytest.raises(DegenerateFormError):
        SymbolProblem.canonical(xi=[0.0] * 6)
    with pytest.raises(DegenerateFormError):
        SymbolProblem.canonical(xi=[1.0, 0.0])


def test_constraint_space_is_five_dimensional():
    space = constraint_space(SymbolProblem.canonical())
    assert space.dimension == 5
    assert space.in_named_basis
    for form in space.forms():
        assert form.degree == 3


def test_linearized_dual_matches_finite_differences(rng):
    bases = 0
    while bases < 3:
        phi = ADAPTED_PHI + 0.1 * Form.from_vector(3, rng.standard_normal(20))
        if lambda_invariant(phi) >= 0:
            continue
        bases += 1
        for _ in range(5):
            delta = Form.from_vector(3, rng.standard_normal(20))
            exact = linearized_dual(phi, delta)
            for h in (1e-4, 1e-5):
                numeric = finite_difference_dual(phi, delta, h)
                assert (exact - numeric).norm() <= 1e-6 * exact.norm()


def test_report_serializes():
    data = _spectrum().to_dict()
    assert data["weight"] == "hitchin"
    assert data["kernel_dimension"] == 2
    assert len(data["matrix"]) == 5
