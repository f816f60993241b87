"""Tests for the command-line front end."""

import json

import pytest

import r2rcontrol
from r2rcontrol.cli import main


CONFIG = {
    "process": {
        "family": "linear_cmp",
        "A": [-180.0, 70.0],
        "B": [[120.0, -30.0, 40.0], [-60.0, 80.0, -25.0]],
        "delta": [1.5, -0.8],
        "Lambda": [[16.0, 0.0], [0.0, 9.0]],
        "T": 10,
    },
    "controller": {"kind": "ewma"},
    "y_star": [-150.0, 100.0],
    "replications": 3,
    "master_seed": 7,
}


@pytest.fixture
def config_file(tmp_path):
    f = tmp_path / "exp.json"
    f.write_text(json.dumps(CONFIG))
    return f


def test_version_prints_package_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == r2rcontrol.__version__


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_run_writes_artifacts_and_prints_stats(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--out", str(out)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert {"mean_mse", "std_mse", "mean_cost", "quartiles"} <= set(stats)
    assert (out / "summary.json").is_file()
    assert (out / "paths.csv").is_file()


def test_missing_config_file_is_config_error(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_key_is_config_error(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({**CONFIG, "bogus": 1}))
    assert main(["run", "--config", str(f), "--out", str(tmp_path / "o")]) == 2


def test_set_override_changes_nested_value(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main([
        "run", "--config", str(config_file), "--out", str(out),
        "--set", "replications=5",
        "--set", "controller.lambda_ewma=0.7",
    ])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["replications"] == 5
    assert summary["controller"]["lambda_ewma"] == 0.7


def test_malformed_override_is_config_error(config_file, tmp_path):
    rc = main(["run", "--config", str(config_file), "--out", str(tmp_path / "o"),
               "--set", "replications"])
    assert rc == 2


def test_seed_flag_overrides_config_seed(config_file, tmp_path):
    out = tmp_path / "out"
    main(["run", "--config", str(config_file), "--out", str(out), "--seed", "99"])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["master_seed"] == 99


def test_env_var_output_dir(config_file, tmp_path, monkeypatch, capsys):
    env_dir = tmp_path / "from-env"
    monkeypatch.setenv("R2R_OUTPUT_DIR", str(env_dir))
    assert main(["run", "--config", str(config_file)]) == 0
    assert (env_dir / "summary.json").is_file()


def test_same_seed_reproduces_artifacts(config_file, tmp_path):
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["run", "--config", str(config_file), "--out", str(out), "--seed", "42"])
        blobs.append((out / "paths.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_theory_check_smoke(tmp_path, capsys):
    # trimmed preset battery would still be slow; just verify the command wiring
    rc = main(["table2", "--replications", "2", "--out", str(tmp_path / "t2"),
               "--seed", "1"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert "wiener" in report["cases"] and "gamma" in report["cases"]
