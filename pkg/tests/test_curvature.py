import numpy as np
import pytest

from common.errors import DegenerateFormError
from core.curvature import (
    MetricLieFrame,
    apply_nijenhuis,
    bianchi_residual,
    curvature_tensors,
    levi_civita,
    metric_compatibility_residual,
    nijenhuis,
    torsion_residual,
)
from core.hitchin import TypeIIAStructure


def _metric(preset, params):
    return MetricLieFrame.from_structure(TypeIIAStructure.build(preset.ansatz.form(params), preset.frame))


@pytest.mark.parametrize("params", [(0.0, 0.0), (0.4, 0.3)])
def test_levi_civita_is_torsion_free_and_metric(nil, params):
    m = _metric(nil, params)
    gamma = levi_civita(m)
    assert torsion_residual(m, gamma) < 1e-12
    assert metric_compatibility_residual(m, gamma) < 1e-12
    assert bianchi_residual(m, curvature_tensors(m, gamma)) < 1e-12


def test_solvmanifold_bianchi(solv):
    m = _metric(solv, (1.0, 2.0, 2.0, 1.0))
    assert bianchi_residual(m, curvature_tensors(m)) < 1e-10


@pytest.mark.parametrize("params", [(0.0, 0.0), (0.5, 0.2), (-0.3, 0.1)])
def test_scalar_curvature_is_minus_nijenhuis_norm(nil, params):
    m = _metric(nil, params)
    data = nijenhuis(m)
    assert curvature_tensors(m).scalar == pytest.approx(-data.norm_sq, rel=1e-10)


def test_nijenhuis_calibration(nil):
    data = nijenhuis(_metric(nil, (0.0, 0.0)))
    assert data.norm_sq == pytest.approx(1.0)


def test_nijenhuis_minus_identity(nil, solv):
    for preset, params in [(nil, (0.2, 0.1)), (solv, (1.0, 2.0, 2.0, 1.0))]:
        m = _metric(preset, params)
        data = nijenhuis(m)
        assert np.allclose(data.n_minus, 2.0 * data.n_plus - 0.25 * data.norm_sq * m.g, atol=1e-10)


def test_nijenhuis_is_antisymmetric_and_anti_linear(rng, nil):
    m = _metric(nil, (0.3, -0.2))
    data = nijenhuis(m)
    X, Y = rng.standard_normal(6), rng.standard_normal(6)
    assert np.allclose(apply_nijenhuis(data, X, Y), -apply_nijenhuis(data, Y, X))
    assert np.allclose(apply_nijenhuis(data, m.J @ X, Y), -m.J @ apply_nijenhuis(data, X, Y))


def test_torus_is_flat(torus):
    m = _metric(torus, (0.3, 0.2))
    curvature = curvature_tensors(m)
    assert np.allclose(curvature.riemann, 0.0)
    assert nijenhuis(m).norm_sq == 0.0


def test_metric_lie_frame_validation(nil):
    with pytest.raises(DegenerateFormError):
        MetricLieFrame(nil.frame, -np.eye(6))
    with pytest.raises(DegenerateFormError):
        MetricLieFrame(nil.frame, np.diag([1, 2, 1, 1, 1, 1.0]), np.kron(np.eye(3), [[0, -1], [1, 0]]))
    with pytest.raises(DegenerateFormError):
        nijenhuis(MetricLieFrame(nil.frame, np.eye(6)))
