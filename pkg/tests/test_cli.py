import numpy as np
import pytest
import yaml

from stokeselast import cli
from stokeselast.fieldio import field_checksum, read_field, read_manifest
from stokeselast.fields import Grid2, ScalarField


def write_config(tmp_path, data, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def run(tmp_path, command, data, out="out", extra=()):
    cfg = write_config(tmp_path, data)
    return cli.main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


SMALL = {"grid": {"nx": 16, "ny": 16}}


def listing(path):
    return sorted(p.name for p in path.iterdir() if p.suffix != ".f64")


def test_phantom_default_config(tmp_path, capsys):
    assert run(tmp_path, "phantom", {}) == cli.EXIT_OK
    out = tmp_path / "out"
    assert listing(out) == ["F_m0.field", "measurements.txt", "mu_true.field",
                            "resolved_config.yaml", "u_m_m0.field"]
    for name in ("F_m0.field", "mu_true.field", "u_m_m0.field"):
        read_field(out / name)               # verifies size and checksum
    assert "phantom:" in capsys.readouterr().out


def test_phantom_records_noise_and_is_reproducible(tmp_path):
    data = dict(SMALL, noise={"level": 0.01, "seed": 7})
    assert run(tmp_path, "phantom", data, "a") == 0
    assert run(tmp_path, "phantom", data, "b") == 0
    m = read_manifest(tmp_path / "a" / "measurements.txt")
    assert float(m["noise_level"]) == 0.01 and m["noise_model"] == "gaussian"
    data_set, _ = cli.read_measurements(tmp_path / "a" / "measurements.txt")
    assert data_set.noise_norm == pytest.approx(0.01 * 0.6181740812794052, rel=1e-6)
    for name in ("mu_true.field", "u_m_m0.field", "F_m0.field"):
        assert field_checksum(tmp_path / "a" / name) == field_checksum(tmp_path / "b" / name)


def test_forward(tmp_path):
    assert run(tmp_path, "forward", dict(SMALL, measurements=[{"mode": "pure-shear", "label": "ps"}])) == 0
    out = tmp_path / "out"
    assert read_field(out / "u_ps.field").staggered
    report = read_manifest(out / "forward_report.txt")
    assert float(report["ps.residual"]) <= 1e-10


def test_limit_study_table(tmp_path, capsys):
    assert run(tmp_path, "limit-study", {"grid": {"nx": 32, "ny": 32},
                                         "phantom": {"inclusions": [{"amplitude": 0.5}]}}) == 0
    text = capsys.readouterr().out.splitlines()
    assert text[0] == "lambda\th1_error\tdiv_norm"
    assert len(text[1:5]) == 4 and all(len(row.split("\t")) == 3 for row in text[1:5])
    slopes = dict(line.split(" = ") for line in text[5:7])
    assert float(slopes["slope_h1"]) <= -0.45 and float(slopes["slope_div"]) <= -0.9
    assert (tmp_path / "out" / "limit_study.tsv").exists()


def test_gradcheck_on_acceptance_phantom(tmp_path, capsys):
    assert run(tmp_path, "gradcheck", {}) == cli.EXIT_OK
    line = capsys.readouterr().out.strip()
    assert float(line.split("=")[1].split()[0]) <= 1e-5


def test_gradcheck_failure_is_non_convergence(tmp_path):
    assert run(tmp_path, "gradcheck", dict(SMALL, gradcheck={"tolerance": 1e-300,
                                                             "directions": 1})) == 3


def test_reconstruct_zero_iterations(tmp_path):
    data = dict(SMALL, landweber={"max_iterations": 0, "mu0": 1.0})
    assert run(tmp_path, "reconstruct", data) == 0
    mu = read_field(tmp_path / "out" / "mu_final.field")
    assert np.array_equal(mu.values, np.ones((16, 16)))
    assert "max_iterations" in (tmp_path / "out" / "trace.tsv").read_text()


def test_reconstruct_from_phantom_files(tmp_path):
    assert run(tmp_path, "phantom", SMALL, "ph") == 0
    data = dict(SMALL, inputs={"measurements": str(tmp_path / "ph" / "measurements.txt")},
                landweber={"max_iterations": 4, "snapshot_every": 2})
    assert run(tmp_path, "reconstruct", data, "rec") == 0
    snaps = sorted(p.name for p in (tmp_path / "rec" / "snapshots").glob("*.field"))
    assert snaps == ["mu_00000.field", "mu_00002.field", "mu_00004.field"]


def test_reconstruct_divergent_fixed_step(tmp_path):
    data = dict(SMALL, landweber={"max_iterations": 1, "line_search": False, "sigma": 1e4})
    assert run(tmp_path, "reconstruct", data) == 3


def test_check_conditions(tmp_path, capsys):
    data = dict(SMALL, conditions={"pairs": [{"A": np.eye(3).tolist(), "At": np.eye(3).tolist()}],
                                   "lopatinskii": [[1.0, 0.0, -1.0]], "n_directions": 64},
                measurements=[{"mode": "pure-shear", "label": "ps"}])
    assert run(tmp_path, "check-conditions", data) == 0
    out = tmp_path / "out"
    assert float(read_manifest(out / "condition_3d_0.txt")["margin"]) == 0.0
    assert read_manifest(out / "lopatinskii_0.txt")["decaying_roots"] == "1"
    assert read_manifest(out / "condition_2d_ps.txt")["pass"] == "true"
    assert (out / "symbol_2d_ps.txt").exists()


def test_deterministic_flag_recorded(tmp_path):
    assert run(tmp_path, "forward", SMALL, extra=["--deterministic"]) == 0
    resolved = yaml.safe_load((tmp_path / "out" / "resolved_config.yaml").read_text())
    assert resolved["deterministic"] is True
    assert resolved["output_dir"] == str(tmp_path / "out")


def test_config_errors_exit_1(tmp_path, capsys):
    assert run(tmp_path, "forward", {"grid": {"nx": 16, "bogus": 1}}) == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    assert cli.main(["forward", "--config", str(tmp_path / "missing.yaml")]) == 1
    data = dict(SMALL, inputs={"measurements": str(tmp_path / "nowhere.txt")})
    assert run(tmp_path, "reconstruct", data) == 1


def test_corrupt_input_exits_1(tmp_path):
    assert run(tmp_path, "phantom", SMALL, "ph") == 0
    payload = tmp_path / "ph" / "u_m_m0.field.f64"
    raw = bytearray(payload.read_bytes())
    raw[17] ^= 0xFF
    payload.write_bytes(bytes(raw))
    data = dict(SMALL, inputs={"measurements": str(tmp_path / "ph" / "measurements.txt")})
    assert run(tmp_path, "gradcheck", data) == 1


def test_wrong_grid_input_exits_1(tmp_path):
    from stokeselast.fieldio import write_field
    write_field(tmp_path / "mu.field", ScalarField.constant(Grid2.unit_square(8), 1.0))
    assert run(tmp_path, "forward", dict(SMALL, inputs={"mu": str(tmp_path / "mu.field")})) == 1


def test_resonance_exits_2(tmp_path, capsys):
    # lowest discrete eigenvalue of the 8x8 constant-modulus operator
    data = {"grid": {"nx": 8, "ny": 8}, "phantom": {"kind": "constant", "inclusions": []},
            "physics": {"omega2": 49.567627650140615}}
    assert run(tmp_path, "forward", data) == cli.EXIT_SOLVER
    assert "eigenvalue" in capsys.readouterr().err


def test_parser_requires_subcommand_and_config():
    with pytest.raises(SystemExit):
        cli.main([])
    with pytest.raises(SystemExit):
        cli.main(["forward"])
