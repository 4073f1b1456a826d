import argparse
import json
import math

import pytest

from src.errors import NearSingularError, ParameterError, SolverError
from src.main import build_config_data, create_parser, main, parse_complex_pair, parse_grid
from src.models.fields import MatrixPotentialField, ScalarField
from src.models.grid import make_grid
from src.schemas import RunConfig
from src.services.enclosure import EXPLICIT
from src.services.pipeline import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, PipelineService, exit_code_for, stage


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def load(tmp_path, name):
    with open(tmp_path / name, encoding="utf-8") as f:
        return json.load(f)


def test_parse_grid():
    assert parse_grid("d=2,n=8") == {"d": 2, "n": 8}
    assert parse_grid("d=3,n=16,L=1.5") == {"d": 3, "n": 16, "L": 1.5}
    with pytest.raises(argparse.ArgumentTypeError):
        parse_grid("d=2,m=8")


def test_parse_complex_pair():
    assert parse_complex_pair("-1,0.5") == (-1.0, 0.5)
    assert parse_complex_pair("2") == (2.0, 0.0)
    with pytest.raises(argparse.ArgumentTypeError):
        parse_complex_pair("a,b")


def test_flags_override_config_file():
    args = create_parser().parse_args(["spectrum", "--grid", "d=2,n=4", "--lambda", "2.0", "--amplitude", "0.5"])
    data = build_config_data(args, {"grid": {"d": 3, "L": 1.0}, "lame": {"lam": 1.0, "mu": 3.0}})
    assert data["command"] == "spectrum"
    assert data["grid"] == {"d": 2, "n": 4, "L": 1.0}
    assert data["lame"] == {"lambda": 2.0, "mu": 3.0}
    assert data["potential"]["amplitude"] == 0.5


@pytest.mark.parametrize("error,code", [
    (NearSingularError("near a symbol value", xi=(1, 0)), EXIT_NUMERICAL),
    (SolverError("eig failed"), EXIT_NUMERICAL),
    (ParameterError("bad p"), EXIT_USAGE),
    (ValueError("bad json"), EXIT_USAGE),
    (RuntimeError("unexpected"), EXIT_NUMERICAL),
])
def test_exit_code_for(error, code):
    assert exit_code_for(error) == code


def test_stage_tags_errors():
    with pytest.raises(ParameterError) as e:
        with stage("weighted_norms", "lp_norm"):
            raise ParameterError("p must be >= 1")
    assert "in weighted_norms.lp_norm" in e.value.__notes__


def test_verify_free_spectrum(tmp_path):
    assert run(tmp_path, "verify", "--suite", "free-spectrum", "--grid", "d=2,n=8") == EXIT_OK
    report = load(tmp_path, "verify.json")
    assert report["payload"]["failed"] == []
    assert report["payload"]["suites"][0]["name"] == "free-spectrum"
    assert report["payload"]["exit_code"] == EXIT_OK


def test_reports_are_deterministic(tmp_path):
    assert run(tmp_path, "verify", "--suite", "symbol") == EXIT_OK
    first = load(tmp_path, "verify.json")
    assert run(tmp_path, "verify", "--suite", "symbol") == EXIT_OK
    second = load(tmp_path, "verify.json")
    assert first["hash"] == second["hash"]
    assert first["payload"] == second["payload"]


def test_malformed_config_is_usage_error(tmp_path):
    config = tmp_path / "run.json"
    config.write_text('{"grid": {"d": 3,}', encoding="utf-8")
    assert run(tmp_path, "enclose", "--config", str(config)) == EXIT_USAGE
    assert not (tmp_path / "enclose.json").exists()


def test_invalid_config_values_are_usage_errors(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"lame": {"lambda": -2.0, "mu": 1.0}}), encoding="utf-8")
    assert run(tmp_path, "enclose", "--config", str(config)) == EXIT_USAGE


def test_unknown_command(tmp_path):
    assert run(tmp_path, "diagonalize") == EXIT_USAGE


def test_grid_size_must_be_power_of_two(tmp_path):
    assert run(tmp_path, "verify", "--suite", "symbol", "--grid", "d=2,n=6") == EXIT_USAGE


def test_inadmissible_exponent_is_usage_error(tmp_path):
    # gamma = 0 is only admissible for d = 3
    assert run(tmp_path, "enclose", "--grid", "d=2,n=8") == EXIT_USAGE


@pytest.mark.parametrize("amplitude,verdict", [
    ("0.001", "absence condition satisfied"),
    ("10", "absence condition NOT satisfied"),
])
def test_enclose_absence_verdict(tmp_path, amplitude, verdict):
    assert run(tmp_path, "enclose", "--grid", "d=3,n=8", "--amplitude", amplitude) == EXIT_OK
    payload = load(tmp_path, "enclose.json")["payload"]
    assert payload["verdict"] == verdict
    assert payload["threshold"] == pytest.approx(0.0648, rel=1e-3)
    assert [s["condition"] for s in payload["stability"]] == ["fkv", "mc", "lp", "sectorial"]


def test_enclose_disk_writes_boundary(tmp_path):
    code = run(tmp_path, "enclose", "--grid", "d=2,n=8", "--gamma", "0.5", "--constant-mode", "configured")
    assert code == EXIT_OK
    payload = load(tmp_path, "enclose.json")["payload"]
    assert payload["verdict"].startswith("eigenvalues enclosed in")
    assert (tmp_path / "disk_boundary.csv").exists()


def test_spectrum_of_small_potential(tmp_path):
    code = run(tmp_path, "spectrum", "--grid", "d=2,n=4", "--gamma", "0.5", "--constant-mode", "configured")
    assert code == EXIT_OK
    payload = load(tmp_path, "spectrum.json")["payload"]
    assert payload["spectrum"]["violations"] == 0
    assert (tmp_path / "eigenvalues.csv").exists()


def test_bsnorm_within_explicit_bound(tmp_path):
    assert run(tmp_path, "bsnorm", "--grid", "d=3,n=8", "--z", "-1,0.5") == EXIT_OK
    estimate = load(tmp_path, "bsnorm.json")["payload"]["estimates"][0]
    assert estimate["within_bounds"] == {"lebesgue": True}
    assert estimate["bound_provenance"]["lebesgue"] == EXPLICIT


def test_planewave_writes_field(tmp_path):
    assert run(tmp_path, "planewave", "--grid", "d=2,n=64", "--mode", "S") == EXIT_OK
    payload = load(tmp_path, "planewave.json")["payload"]
    assert payload["planewave"]["field_path"] == "planewave.lfd"
    assert (tmp_path / "planewave.lfd").exists()
    assert payload["weyl"]["scales"] == [1, 2, 4, 8]


def test_planewave_without_weyl_check(tmp_path):
    assert run(tmp_path, "planewave", "--grid", "d=3,n=8", "--mode", "P", "--weyl-scale", "0") == EXIT_OK
    payload = load(tmp_path, "planewave.json")["payload"]
    assert "weyl" not in payload
    assert payload["planewave"]["z"] == pytest.approx(3.0)


def test_kerman_sawyer_enclose_uses_the_a2_constant(tmp_path):
    argv = ("enclose", "--grid", "d=3,n=8", "--kind", "kerman_sawyer", "--potential", "inverse_square_regularized",
            "--regularization", "1.0", "--amplitude", "0.001")
    assert run(tmp_path, *argv) == EXIT_OK
    payload = load(tmp_path, "enclose.json")["payload"]
    q2 = payload["norms"]["a_p"]["value"]
    disk = payload["disk"]
    assert q2 > 1
    assert disk["q2"] == pytest.approx(q2)
    assert disk["constant_used"] == pytest.approx((1 + 6 * q2 ** 2) ** 1.5)

    fkv, mc = payload["stability"][0], payload["stability"][1]
    assert fkv["c_V_source"] == "C*Q2(|V|)"
    assert fkv["inputs"]["c_V"] == pytest.approx(q2)
    assert mc["inputs"]["c_V"] == pytest.approx(q2)
    assert fkv["threshold"] == pytest.approx(1 / (1 + 6 * q2 ** 2))


def test_empirical_weighted_riesz_constant(tmp_path):
    pipeline = PipelineService()
    grid = make_grid(3, 8, 2 * math.pi)
    V = MatrixPotentialField.scalar(ScalarField.constant(grid, 0.01))
    config = RunConfig(command="enclose", constants={"riesz_source": "empirical"}, output_dir=str(tmp_path))
    c_V, source = pipeline._weighted_riesz(config, V, pipeline.enclosure_service)
    # ‖R_j‖ on L² with a constant weight is 1
    assert c_V == pytest.approx(1.0, rel=1e-5)
    assert source.startswith("empirical")


def test_run_constants_do_not_leak_into_the_shared_service(tmp_path):
    pipeline = PipelineService()
    before = pipeline.enclosure_service.settings.constants.C_F
    config = RunConfig(
        command="enclose", grid={"d": 3, "n": 8}, bound={"kind": "morrey_campanato", "p": 1.25},
        constants={"c_F": 5.0}, output_dir=str(tmp_path),
    )
    assert pipeline.execute(config) == EXIT_OK
    assert pipeline.enclosure_service.settings.constants.C_F == before

    disk = load(tmp_path, "enclose.json")["payload"]["disk"]
    q2 = disk["q2"]
    assert disk["constant_used"] == pytest.approx((5.0 * (1 + 6 * q2 ** 2)) ** 1.5)


def test_residual_tolerance_from_run_config(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"tolerances": {"residual": 1e-30}}), encoding="utf-8")
    argv = ("spectrum", "--config", str(config), "--grid", "d=2,n=4", "--gamma", "0.5", "--constant-mode", "configured")
    assert run(tmp_path, *argv) == EXIT_NUMERICAL
