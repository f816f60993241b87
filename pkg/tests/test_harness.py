"""Tests for metrics, the replication runner, and artifact persistence."""

import json

import numpy as np
import pytest

from r2rcontrol.errors import ConfigError, DimensionError, UndefinedRatioError
from r2rcontrol.harness import (
    ExperimentConfig,
    boxplot_rows,
    compare_controllers,
    error_ratio_series,
    mse,
    run_experiment,
    run_replication,
    run_replications,
    summarize,
    total_cost,
    write_paths_csv,
)
from r2rcontrol.processes import SamplePath
from r2rcontrol.rng import make_rng


def _path(y, u=None):
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if u is None:
        u = np.zeros_like(y)
    return SamplePath(u=np.asarray(u, dtype=float), y=y, d=None,
                      y0=np.zeros(y.shape[1]), seed=0)


CMP_PROCESS = {
    "family": "linear_cmp",
    "A": [-180.0, 70.0],
    "B": [[120.0, -30.0, 40.0], [-60.0, 80.0, -25.0]],
    "delta": [1.5, -0.8],
    "Lambda": [[16.0, 0.0], [0.0, 9.0]],
    "T": 10,
}
Y_STAR = [-150.0, 100.0]


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def test_total_cost_zero_on_target():
    assert total_cost(_path([[90.0], [90.0]]), [90.0]) == 0.0


def test_total_cost_scalar_example():
    assert total_cost(_path([[91.0], [89.0]]), [90.0]) == pytest.approx(2.0)


def test_total_cost_vector_example():
    assert total_cost(_path([[1701.0, 151.0]]), [1700.0, 150.0]) == pytest.approx(2.0)


def test_total_cost_dimension_mismatch():
    with pytest.raises(DimensionError):
        total_cost(_path([[1.0, 2.0]]), [0.0])


def test_mse_is_cost_over_horizon():
    rng = make_rng(51, tag="mse")
    p = _path(rng.normal(90, 5, size=(17, 1)))
    assert total_cost(p, [90.0]) == pytest.approx(17 * mse(p, [90.0]))


def test_error_ratio_scalar_example():
    r = error_ratio_series(_path([[99.0]]), [90.0])
    assert r[0, 0] == pytest.approx(0.1)


def test_error_ratio_zero_target_rejected():
    with pytest.raises(UndefinedRatioError):
        error_ratio_series(_path([[1.0, 2.0]]), [0.0, 1.0])


def test_metrics_nonnegative_and_zero_iff_on_target():
    rng = make_rng(52, tag="metric-prop")
    for _ in range(20):
        y = rng.normal(0, 3, size=(8, 2))
        p = _path(y)
        c = total_cost(p, [0.0, 0.0])
        assert c >= 0.0
        assert (c == 0.0) == bool(np.all(y == 0.0))


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_rejects_bad_counts():
    with pytest.raises(ConfigError):
        ExperimentConfig(process=CMP_PROCESS, controller={"kind": "null"},
                         y_star=Y_STAR, replications=0)


def test_config_dimension_validation():
    cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "null"},
                           y_star=[1.0, 2.0, 3.0])
    with pytest.raises(ConfigError):
        cfg.validate_dimensions()


def test_config_from_file_rejects_unknown_keys(tmp_path):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps({"process": CMP_PROCESS, "controller": {"kind": "null"},
                             "y_star": Y_STAR, "bogus": 1}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(f)


# ---------------------------------------------------------------------------
# replication runner
# ---------------------------------------------------------------------------


def _oracle_config(**kw):
    noiseless = dict(CMP_PROCESS, Lambda=[[0.0, 0.0], [0.0, 0.0]], delta=[0.0, 0.0])
    base = dict(process=noiseless, controller={"kind": "oracle"}, y_star=Y_STAR,
                replications=1, master_seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_degenerate_oracle_run_has_zero_cost():
    stats = run_experiment(_oracle_config())
    assert stats.mean_cost == pytest.approx(0.0, abs=1e-18)


def test_summary_permutation_invariant():
    cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "ewma"},
                           y_star=Y_STAR, replications=8, master_seed=3)
    results = run_replications(cfg)
    a = summarize(results).to_dict()
    b = summarize(results[::-1]).to_dict()
    assert a == b


def test_threading_does_not_change_results():
    kw = dict(process=CMP_PROCESS, controller={"kind": "ewma"}, y_star=Y_STAR,
              replications=4, master_seed=5)
    serial = run_replications(ExperimentConfig(**kw, threads=1))
    parallel = run_replications(ExperimentConfig(**kw, threads=2))
    for r1, r2 in zip(serial, parallel):
        np.testing.assert_array_equal(r1.path.y, r2.path.y)
        assert r1.total_cost == r2.total_cost


def test_replication_seeding_is_stable():
    cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "ewma"},
                           y_star=Y_STAR, replications=3, master_seed=9)
    r1 = run_replication(cfg, 2)
    r2 = run_replication(cfg, 2)
    np.testing.assert_array_equal(r1.path.y, r2.path.y)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def test_artifacts_reproduce_byte_for_byte(tmp_path):
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "ewma"},
                               y_star=Y_STAR, replications=4, master_seed=7,
                               output_dir=str(out))
        run_experiment(cfg)
        blobs.append({p.name: p.read_bytes() for p in out.iterdir() if p.is_file()})
    assert set(blobs[0]) == {"paths.csv", "summary.json", "boxplot.csv"}
    assert blobs[0] == blobs[1]


def test_paths_csv_schema(tmp_path):
    cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "ewma"},
                           y_star=Y_STAR, replications=2, master_seed=7)
    results = run_replications(cfg)
    f = tmp_path / "paths.csv"
    write_paths_csv(results, f)
    lines = f.read_text().splitlines()
    assert lines[0] == "replication,t,u_1,u_2,u_3,y_1,y_2,d"
    assert len(lines) == 1 + 2 * CMP_PROCESS["T"]


def test_audit_files_written(tmp_path):
    cfg = ExperimentConfig(process=CMP_PROCESS, controller={"kind": "ewma"},
                           y_star=Y_STAR, replications=3, master_seed=7,
                           output_dir=str(tmp_path / "out"))
    run_experiment(cfg)
    audit = tmp_path / "out" / "audit"
    payload = json.loads((audit / "0.json").read_text())
    assert payload["replication"] == 0
    assert payload["mse"] == pytest.approx(payload["total_cost"] / CMP_PROCESS["T"])
    assert len(list(audit.iterdir())) == 3


def test_boxplot_whiskers_clip_outliers():
    col = np.array([1.0, 1.1, 0.9, 1.05, 0.95, 1.0, 50.0])
    rows = boxplot_rows(col.reshape(-1, 1))
    row = rows[0]
    assert row["n_outliers"] == 1
    assert row["whisker_high"] < 50.0
    q1, q3 = np.percentile(col, [25, 75])
    assert row["q1"] == pytest.approx(q1)
    assert row["q3"] == pytest.approx(q3)


# ---------------------------------------------------------------------------
# controller comparison
# ---------------------------------------------------------------------------


def test_compare_identical_controllers_gives_identical_columns(tmp_path):
    kw = dict(process=CMP_PROCESS, y_star=Y_STAR, replications=5, master_seed=11)
    cfgs = [ExperimentConfig(controller={"kind": "ewma"}, **kw) for _ in range(2)]
    out = tmp_path / "cmp.csv"
    report = compare_controllers(cfgs, ["one", "two"], out_path=out)
    assert report["controllers"]["one"]["costs"] == report["controllers"]["two"]["costs"]
    rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
    assert all(r[1] == r[2] for r in rows)


def test_compare_rejects_mismatched_targets():
    kw = dict(process=CMP_PROCESS, replications=2, master_seed=11)
    cfgs = [
        ExperimentConfig(controller={"kind": "ewma"}, y_star=Y_STAR, **kw),
        ExperimentConfig(controller={"kind": "null"}, y_star=[0.0, 0.0], **kw),
    ]
    with pytest.raises(ConfigError):
        compare_controllers(cfgs, ["a", "b"])
