import json

import pytest

from common.errors import ConfigError
from handlers.schema import FlowConfig, SemiflatConfig, build_run_config, from_layers
from main import main
from storage.artifacts import config_hash, read_csv


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path / "out"


def _manifest(path):
    return json.loads(path.with_name(path.name + ".manifest.json").read_text(encoding="utf-8"))


def test_flow_on_torus(out):
    assert main(["--out", str(out), "flow", "--preset", "torus", "--T", "0.05", "--record-stride", "10"]) == 0
    rows = read_csv(out / "flow_torus_hitchin.csv")
    assert len(rows) == 6
    assert all(row["a"] == 0.0 and row["b"] == 0.0 for row in rows)
    manifest = _manifest(out / "flow_torus_hitchin.csv")
    assert manifest["library_version"] == "0.1.0"
    assert manifest["config_sha256"] == config_hash(manifest["config"])


def test_flow_on_solvmanifold_has_conserved_columns(out):
    args = ["--out", str(out), "flow", "--preset", "solv", "--init", "1,2,2,1", "--T", "0.1", "--record-stride", "50"]
    assert main(args) == 0
    rows = read_csv(out / "flow_solvmanifold_tv_hitchin.csv")
    assert rows[0]["alphaOverDelta"] == 1.0
    assert rows[-1]["betaOverGamma"] == pytest.approx(1.0, rel=1e-12)


def test_flow_output_is_deterministic(out):
    args = ["--out", str(out), "flow", "--a0", "0.2", "--b0", "0.1", "--T", "0.2", "--record-stride", "20"]
    path = out / "flow_nilmanifold_dbt_hitchin.csv"
    assert main(args) == 0
    first = path.read_bytes()
    assert main(args) == 0
    assert path.read_bytes() == first


def test_flow_exit_codes(out):
    assert main(["--out", str(out), "flow", "--preset", "iwasawa", "--T", "0.1"]) == 2
    assert main(["--out", str(out), "flow", "--weight", "epsilon", "--T", "0.1"]) == 2
    assert main(["--out", str(out), "flow", "--b0", "1.5", "--T", "0.1"]) == 3
    assert main(["--out", str(out), "flow", "--init", "0,0", "--a0", "0.1"]) == 2


@pytest.mark.parametrize("integrator", ["rk4", "rk45"])
def test_flow_blow_up_exits_with_geometric_code(out, integrator):
    args = ["--out", str(out), "flow", "--preset", "solv", "--weight", "type-iia", "--init", "1,2,2,1"]
    assert main(args + ["--T", "0.3", "--integrator", integrator]) == 3


def test_symbol_default_spectrum(out):
    assert main(["--out", str(out), "symbol"]) == 0
    report = json.loads((out / "symbol_hitchin.json").read_text(encoding="utf-8"))
    assert report["eigenvalues"] == pytest.approx([0.0, 0.0, 1.0, 1.0, 1.0], abs=1e-12)
    assert report["basis"] == ["kappa", "mu1+", "mu1-", "mu2+", "mu2-"]
    assert report["base"] == "adapted"


def test_symbol_type_iia_and_zero_covector(out):
    assert main(["--out", str(out), "symbol", "--weight", "type-iia"]) == 0
    report = json.loads((out / "symbol_type-iia.json").read_text(encoding="utf-8"))
    assert report["kernel_dimension"] == 1
    assert main(["--out", str(out), "symbol", "--xi", "0,0,0,0,0,0"]) == 2
    assert main(["--out", str(out), "symbol", "--xi", "1,0"]) == 2


def test_symbol_on_preset(out):
    assert main(["--out", str(out), "symbol", "--preset", "nilmanifold", "--init", "0.3,0.2"]) == 0


def test_semiflat_flat_data(out):
    args = ["--out", str(out), "semiflat", "--n", "8", "--epsilon", "0", "--steps", "2", "--residual-stride", "1"]
    assert main(args) == 0
    rows = read_csv(out / "semiflat_iib_standard_n8.csv")
    assert [row["step"] for row in rows] == [1.0]
    assert rows[0]["maxResidual"] == 0.0
    assert rows[0]["minDetG"] == pytest.approx(1.0)


def test_semiflat_kr_with_dump(out):
    args = ["--out", str(out), "semiflat", "--n", "8", "--epsilon", "0.005", "--steps", "3",
            "--flow", "kr", "--phase", "rotated", "--dump-fields"]
    assert main(args) == 0
    assert (out / "semiflat_kr_rotated_n8.csv").exists()
    assert (out / "semiflat_kr_rotated_n8.g.bin").stat().st_size == 6 * 8 ** 3 * 8
    assert (out / "semiflat_kr_rotated_n8.g.bin.json").exists()


def test_semiflat_rejects_large_perturbation(out):
    assert main(["--out", str(out), "semiflat", "--n", "8", "--epsilon", "0.05", "--steps", "2"]) == 2


def test_verify_selected_checks(out):
    assert main(["--out", str(out), "verify-all", "--quick", "--checks", "1,7"]) == 0
    verdicts = json.loads((out / "verdicts.json").read_text(encoding="utf-8"))["verdicts"]
    assert [v["check"] for v in verdicts] == [1, 7]
    assert all(v["verdict"] == "PASS" for v in verdicts)
    assert main(["--out", str(out), "verify-all", "--checks", "11"]) == 2


def test_run_file_layers(out, tmp_path):
    run_file = tmp_path / "run.json"
    run_file.write_text(json.dumps({"command": "flow", "flow": {"preset": "torus", "T": 0.5}, "seed": 7}))
    run = build_run_config("flow", {"T": 0.25}, str(run_file), str(out))
    assert run.section.preset == "torus"
    assert run.section.T == 0.25
    assert run.section.dt == 1e-3
    assert run.seed == 7
    assert "out" not in run.effective()


def test_run_file_errors(out, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"flow": {"presett": "torus"}}))
    assert main(["--out", str(out), "--config", str(bad), "flow"]) == 2
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"command": "symbol"}))
    with pytest.raises(ConfigError):
        build_run_config("flow", {}, str(wrong))
    with pytest.raises(ConfigError):
        build_run_config("flow", {}, str(tmp_path / "missing.json"))


def test_layer_coercion():
    cfg = from_layers(FlowConfig, {"T": "2", "init": "1,2,2,1"}, None)
    assert cfg.T == 2.0
    assert cfg.init == [1.0, 2.0, 2.0, 1.0]
    with pytest.raises(ConfigError):
        from_layers(FlowConfig, {"dt": "fast"})
    semiflat = from_layers(SemiflatConfig, {"modes": [{"amplitude": 0.001, "wavevector": [0, 1, 0]}]})
    assert semiflat.setup().modes[0].wavevector == (0, 1, 0)


def test_config_load_error_is_recorded(tmp_path):
    from config import DEFAULT_PATH, config

    broken = tmp_path / "config.json"
    broken.write_text("{not json", encoding="utf-8")
    try:
        config.load(str(broken))
        assert config.load_error is not None
        assert config.section("tolerances") == {}
    finally:
        config.load(DEFAULT_PATH)
    assert config.load_error is None
    assert config.section("tolerances")["semiflat_order"] == 1.8


def test_projection_tolerance_comes_from_config(tmp_path):
    from config import config

    run = build_run_config("flow", {})
    assert run.section.projection_tol == config.section("tolerances")["projection"]
    assert run.section.spec().projection_tol == run.section.projection_tol
    custom = tmp_path / "run.json"
    custom.write_text(json.dumps({"flow": {"projection_tol": 1e-6}}), encoding="utf-8")
    assert build_run_config("flow", {}, str(custom)).section.projection_tol == 1e-6
