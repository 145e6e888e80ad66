import numpy as np
import pytest

from common.errors import ConfigError, NotPositive
from core.hitchin import norm_squared
from presets import preset_registry
from presets.nilmanifold import nilmanifold_nijenhuis_sq, nilmanifold_oracle, positivity_margin
from presets.solvmanifold import SOLV_LAMBDA, solvmanifold_limit, solvmanifold_oracle


def test_registry_aliases():
    assert preset_registry.get("nil") is preset_registry.get("nilmanifold")
    assert preset_registry.get("solv") is preset_registry.get("solvmanifold_tv")
    assert set(preset_registry.list_presets()) == {"torus", "nilmanifold_dbt", "solvmanifold_tv"}


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset_registry.get("iwasawa")


@pytest.mark.parametrize("name", ["torus", "nilmanifold", "solvmanifold"])
def test_frames_are_valid(name):
    frame = preset_registry.get(name).frame
    assert frame.jacobi_residual() == 0.0
    assert frame.symplectic_residual() == 0.0
    assert frame.volume_coefficient == pytest.approx(1.0)


def test_solvmanifold_constant():
    assert SOLV_LAMBDA == pytest.approx(np.log((3 + np.sqrt(5)) / 2))


def test_nilmanifold_positivity(nil):
    assert nil.ansatz.is_positive((0.0, 0.5))
    assert not nil.ansatz.is_positive((0.0, 1.5))
    assert positivity_margin(0.0, 1.5) < 0
    with pytest.raises(NotPositive):
        nilmanifold_oracle(0.0, (0.0, 1.5))


def test_ansatz_parameter_count(solv):
    with pytest.raises(ConfigError):
        solv.ansatz.form((1.0, 1.0))


def test_nilmanifold_oracle_closed_form():
    a, b = nilmanifold_oracle(2.0, (0.0, 0.0))
    assert (1 + a) ** 1.5 == pytest.approx(7.0)
    assert b == 0.0
    assert nilmanifold_nijenhuis_sq(2.0, (0.0, 0.0)) == pytest.approx(1 / 7)
    assert np.allclose(nilmanifold_oracle(0.0, (0.3, 0.2)), (0.3, 0.2))


def test_solvmanifold_oracle_initial_value_and_ratios():
    initial = (1.0, 2.0, 2.0, 1.0)
    assert np.allclose(solvmanifold_oracle(0.0, initial), initial)
    alpha, beta, gamma, delta = solvmanifold_oracle(0.7, initial)
    assert alpha / delta == pytest.approx(1.0)
    assert beta / gamma == pytest.approx(1.0)


def test_solvmanifold_limit_has_unit_norm(solv):
    for initial in [(1.0, 2.0, 2.0, 1.0), (0.5, 1.0, 3.0, 2.0)]:
        limit = solvmanifold_limit(initial)
        assert norm_squared(solv.ansatz.form(limit)) == pytest.approx(1.0)


def test_solvmanifold_limit_is_approached():
    initial = (0.5, 1.0, 3.0, 2.0)
    params = solvmanifold_oracle(20.0, initial, rescaled=True)
    scale = np.sqrt(8.0 * np.sqrt(np.prod(params)))
    assert np.allclose(params / scale, solvmanifold_limit(initial), rtol=1e-8)


def test_conserved_quantities(solv, nil):
    assert solv.conserved_quantities((1.0, 2.0, 4.0, 0.5)) == {"alphaOverDelta": 2.0, "betaOverGamma": 0.5}
    assert nil.conserved_quantities((0.0, 0.0)) == {}
