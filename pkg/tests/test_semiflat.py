import numpy as np
import pytest

from common.errors import ConfigError, PositivityLost
from core.exterior import Form
from semiflat.evolution import SemiflatFlow, diffusivity, evolve, final_state, iib_rhs, kr_rhs, stable_dt
from semiflat.forms import (
    closedness_residual,
    expected_complex_structure,
    hitchin_consistency,
    norm_identity_residual,
    primitivity_residual,
    reconstruct_forms,
    require_algebraic_identities,
    semiflat_frame,
)
from semiflat.grid import PeriodicGrid
from semiflat.hessian import FIELD_NAMES, HessianMetricField, PerturbationMode
from semiflat.verification import (
    SemiflatSetup,
    component_identities,
    dump_fields,
    duality_residual,
    duality_series,
    refinement_study,
)
from storage.fields import read_field_dump


def _single_mode(n, epsilon=1e-2, wavevector=(1, 0, 0)):
    return HessianMetricField.from_potential(PeriodicGrid(n), np.eye(3), (PerturbationMode(epsilon, wavevector),))


# ------------------------------------------------------------------ 网格


def test_grid_requires_enough_points():
    with pytest.raises(ConfigError):
        PeriodicGrid(4)
    with pytest.raises(ConfigError):
        PeriodicGrid(16.5)


def test_central_difference_is_second_order():
    errors = []
    for n in (16, 32):
        grid = PeriodicGrid(n)
        x = grid.coordinates[1]
        f = np.sin(2 * np.pi * x)
        errors.append(np.max(np.abs(grid.derivative(f, 2) - 2 * np.pi * np.cos(2 * np.pi * x))))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)


def test_hessian_stencils():
    grid = PeriodicGrid(32)
    x1, x2, _ = grid.coordinates
    f = np.cos(2 * np.pi * (x1 + x2))
    H = grid.hessian(f)
    assert np.allclose(H, np.swapaxes(H, 0, 1))
    assert np.allclose(H[2], 0.0)
    exact = -(2 * np.pi) ** 2 * f
    assert np.max(np.abs(H[0, 1] - exact)) < 0.05 * (2 * np.pi) ** 2
    assert grid.l2(np.ones(grid.shape)) == pytest.approx(1.0)


# ------------------------------------------------------------------ 初始数据


def test_mode_validation():
    with pytest.raises(ConfigError):
        PerturbationMode(0.01, (1.5, 0, 0))
    with pytest.raises(ConfigError):
        PerturbationMode.from_dict({"amplitude": 0.01, "wavevector": [1, 0, 0], "wave": 1})
    mode = PerturbationMode.from_dict({"amplitude": 0.01, "wavevector": [1, 2, 0]})
    assert mode.curvature_bound == pytest.approx(0.01 * (2 * np.pi) ** 2 * 5)


def test_perturbation_bound_is_enforced():
    with pytest.raises(ConfigError):
        _single_mode(8, epsilon=0.02)
    with pytest.raises(ConfigError):
        HessianMetricField.from_potential(PeriodicGrid(8), -np.eye(3))


def test_single_mode_metric_is_analytic():
    field = _single_mode(16)
    x1 = field.grid.coordinates[0]
    assert np.allclose(field.g[0, 0], 1 - 4 * np.pi ** 2 * 1e-2 * np.cos(2 * np.pi * x1))
    assert np.allclose(field.g[1, 1], 1.0)
    assert np.allclose(field.g[0, 1], 0.0)
    assert np.allclose(field.det(), field.g[0, 0])
    assert field.hessian_residual() < 1e-12


def test_positivity_loss_reports_location():
    grid = PeriodicGrid(8)
    g = HessianMetricField.constant(grid).g.copy()
    g[0, 0, 1, 2, 3] = -1.0
    with pytest.raises(PositivityLost) as info:
        HessianMetricField(grid, g, time=0.5)
    assert info.value.location == (1, 2, 3)
    assert info.value.time == 0.5


def test_fields_round_trip_through_upper_triangle():
    field = _single_mode(8, epsilon=1e-3, wavevector=(1, 1, 0))
    rebuilt = HessianMetricField.from_fields(field.grid, field.fields())
    assert np.array_equal(rebuilt.g, field.g)


# ------------------------------------------------------------------ 演化


def test_rhs_vanish_on_flat_and_volume_preserving_data():
    grid = PeriodicGrid(8)
    assert np.allclose(iib_rhs(HessianMetricField.constant(grid)), 0.0)
    assert np.allclose(kr_rhs(HessianMetricField.constant(grid, np.diag([2.0, 0.5, 1.0]))), 0.0)


def test_iib_rhs_single_mode_matches_discrete_symbol():
    epsilon = 1e-2
    field = _single_mode(32, epsilon)
    h = field.grid.h
    x1 = field.grid.coordinates[0]
    expected = 4 * np.pi ** 2 * epsilon * np.sin(np.pi * h) ** 2 / h ** 2 * np.cos(2 * np.pi * x1)
    rhs = iib_rhs(field)
    assert np.allclose(rhs[0, 0], expected, atol=1e-10)
    assert np.allclose(rhs[1, 1], 0.0)
    assert np.max(np.abs(rhs[0, 0])) == pytest.approx(4 * np.pi ** 4 * epsilon, rel=1e-2)


def test_kr_rhs_single_mode():
    field = _single_mode(16)
    expected = 0.5 * field.grid.second(np.log(field.g[0, 0]), 1, 1)
    assert np.allclose(kr_rhs(field)[0, 0], expected, atol=1e-12)


def test_diffusivity_and_stable_dt():
    field = HessianMetricField.constant(PeriodicGrid(8), np.diag([2.0, 1.0, 0.5]))
    assert diffusivity(field, "iib") == pytest.approx(1.0)
    assert diffusivity(field, "kr") == pytest.approx(2.0)
    assert stable_dt(field, SemiflatFlow.KR, cfl=0.1) == pytest.approx(0.1 / 64 / 2.0)
    with pytest.raises(ConfigError):
        diffusivity(field, "ricci")


def test_cfl_violation():
    field = HessianMetricField.constant(PeriodicGrid(8))
    with pytest.raises(ConfigError):
        list(evolve(field, "iib", 0.01, 2, strict_cfl=True))
    # 平坦数据是定态，超出界时只警告
    state = final_state(field, "iib", 0.01, 2)
    assert state.step == 2
    assert np.allclose(state.field.g, field.g)


def test_evolve_yields_initial_state_first():
    field = _single_mode(8, epsilon=1e-3)
    states = list(evolve(field, "iib", 1e-5, 3))
    assert [s.step for s in states] == [0, 1, 2, 3]
    assert states[0].field is field
    assert states[-1].time == pytest.approx(3e-5)


def test_long_run_stays_positive():
    field = _single_mode(16, epsilon=5e-3, wavevector=(1, 1, 0))
    for flow in ("iib", "kr"):
        dt = stable_dt(field, flow)
        state = final_state(field, flow, dt, 200, strict_cfl=True)
        assert np.min(state.field.min_eigenvalue()) > 0
        assert state.field.symmetry_residual() == 0.0


# ------------------------------------------------------------------ 形式


def test_forms_at_identity_metric():
    field = HessianMetricField.constant(PeriodicGrid(8))
    forms = reconstruct_forms(field)
    expected = Form.basis(1, 2, 3) - Form.basis(1, 5, 6) + Form.basis(2, 4, 6) - Form.basis(3, 4, 5)
    assert forms.phi.coefficient((1, 2, 3))[0, 0, 0] == 1.0
    for index, value in expected.items():
        assert np.allclose(forms.phi.coefficient(index), value)
    assert np.allclose(forms.norm_sq, 4.0)
    assert forms.frame.volume_coefficient == pytest.approx(-1.0)


def test_algebraic_identities_on_perturbed_data():
    field = HessianMetricField.from_potential(
        PeriodicGrid(16),
        np.diag([1.0, 1.2, 0.9]),
        (PerturbationMode(2e-3, (1, 1, 0)), PerturbationMode(1e-3, (0, 1, 2), 0.3)),
    )
    forms = reconstruct_forms(field)
    assert norm_identity_residual(forms) < 1e-12
    assert primitivity_residual(forms) < 1e-12
    require_algebraic_identities(forms)
    report = hitchin_consistency(forms, field, samples=50)
    assert report["dual"] < 1e-10
    assert report["J"] < 1e-10
    assert report["norm"] < 1e-12


def test_expected_complex_structure_squares_to_minus_one():
    g = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]])
    J = expected_complex_structure(g)
    assert np.allclose(J @ J, -np.eye(6))


def test_closedness_converges():
    residuals = []
    for n in (16, 32):
        forms = reconstruct_forms(_single_mode(n, 2e-3, (1, 1, 0)))
        residuals.append(max(closedness_residual(forms).values()))
    assert residuals[1] <= max(residuals[0] / 3.0, 1e-12)


def test_rotated_forms():
    forms = reconstruct_forms(_single_mode(8, 1e-3))
    rotated = forms.rotated()
    assert rotated.phi is forms.phi_hat
    assert rotated.phi_hat.allclose(-forms.phi)
    assert norm_identity_residual(rotated) < 1e-12


def test_semiflat_frame_derivatives_use_grid():
    grid = PeriodicGrid(16)
    frame = semiflat_frame(grid)
    assert frame.ring.has_derivatives
    assert frame.ring.derivative(3.0, 1) == 0.0


# ------------------------------------------------------------------ 对偶残差


@pytest.mark.parametrize("flow", ["iib", "kr"])
@pytest.mark.parametrize("phase", ["standard", "rotated"])
def test_flat_data_has_zero_residual(flow, phase):
    field = HessianMetricField.constant(PeriodicGrid(8), np.diag([1.0, 2.0, 1.5]))
    assert duality_residual(field, field, field, 1e-5, flow, phase) == (0.0, 0.0)


def test_residual_rejects_unknown_phase():
    field = HessianMetricField.constant(PeriodicGrid(8))
    with pytest.raises(ConfigError):
        duality_residual(field, field, field, 1e-5, "iib", "sideways")


def test_series_rows_and_columns():
    setup = SemiflatSetup.single_mode(1e-2, n=8, steps=12, residual_stride=5)
    series = duality_series(setup)
    assert [row[0] for row in series.rows] == [1, 6, 11]
    assert series.header == ("step", "maxResidual", "l2Residual", "minDetG")
    assert series.final is not None
    assert all(row[3] > 0 for row in series.rows)


def test_setup_validation():
    with pytest.raises(ConfigError):
        SemiflatSetup(steps=1)
    with pytest.raises(ConfigError):
        SemiflatSetup(flow="ricci")
    with pytest.raises(ConfigError):
        SemiflatSetup(phase="imaginary")


@pytest.mark.parametrize("flow", ["iib", "kr"])
@pytest.mark.parametrize("phase", ["standard", "rotated"])
def test_duality_residual_is_second_order(flow, phase):
    setup = SemiflatSetup.single_mode(1e-2, dt=1e-5, steps=2, flow=flow, phase=phase)
    report = refinement_study(setup, (16, 32))
    assert report.residuals[1] < report.residuals[0]
    assert report.min_order >= 1.8


@pytest.mark.slow
def test_refinement_to_64():
    setup = SemiflatSetup.single_mode(1e-2, dt=1e-5, steps=20, residual_stride=10)
    report = refinement_study(setup, (16, 32, 64))
    assert len(report.orders) == 2
    assert report.min_order >= 1.8
    assert report.to_dict()["sizes"] == [16, 32, 64]


def test_refinement_needs_two_sizes():
    with pytest.raises(ConfigError):
        refinement_study(SemiflatSetup.single_mode(1e-2), (16,))


def test_component_identities():
    report = component_identities(SemiflatSetup.single_mode(1e-2, n=16, dt=1e-5))
    assert report["hessian_identity"] < 1e-12
    assert report["metric_rate"] < 1e-6
    assert report["volume_rate"] < 1e-6
    assert report["legendre_trace"] < 1e-6
    with pytest.raises(ConfigError):
        component_identities(SemiflatSetup.single_mode(1e-2, n=16, flow="kr"))


def test_field_dump_round_trip(tmp_path):
    field = _single_mode(8, 1e-3, (0, 1, 1))
    path = dump_fields(field, tmp_path / "g.bin", time=0.25)
    data, meta = read_field_dump(path)
    assert meta["fields"] == list(FIELD_NAMES)
    assert meta["shape"] == [6, 8, 8, 8]
    assert meta["byte_order"] == "little"
    assert meta["time"] == 0.25
    assert np.array_equal(data, field.fields())
