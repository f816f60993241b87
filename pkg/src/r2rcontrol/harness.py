"""Seeded multi-replication experiment runner, metrics, and persistence.

Artifacts per experiment (under ``output_dir``):

* ``paths.csv``    -- final sample path of every replication
* ``summary.json`` -- summary statistics plus the resolved config and seed
* ``boxplot.csv``  -- per-path-index total-cost quartiles and 1.5*IQR whiskers
* ``audit/<rep>.json`` -- per-replication convergence diagnostics

Re-running with the same master seed reproduces every artifact
byte-for-byte; replications are keyed by index, so execution order does
not matter.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .controllers import (
    OapeController,
    RlPgsController,
    controller_from_config,
)
from .errors import ConfigError, DimensionError, UndefinedRatioError
from .processes import SamplePath, process_from_config, simulate_path
from .rng import derive_int_seed

FLOAT_FMT = "%.17g"  # 17 significant digits: byte-exact reproducibility


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def total_cost(path: SamplePath, y_star) -> float:
    """Sum over periods of (y_t - y*)'(y_t - y*)."""
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if y_star.shape[0] != path.y.shape[1]:
        raise DimensionError("target dimension does not match outputs")
    dev = path.y - y_star
    return float(np.sum(dev * dev))


def mse(path: SamplePath, y_star) -> float:
    """total_cost / T."""
    return total_cost(path, y_star) / path.horizon


def error_ratio_series(path: SamplePath, y_star) -> np.ndarray:
    """(y_t - y*)/y* per period and output coordinate, shape (T, m_y)."""
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if y_star.shape[0] != path.y.shape[1]:
        raise DimensionError("target dimension does not match outputs")
    if np.any(y_star == 0.0):
        raise UndefinedRatioError("error ratio undefined for zero target coordinate")
    return (path.y - y_star) / y_star


# ---------------------------------------------------------------------------
# Config and results
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    process: dict
    controller: dict
    y_star: list
    n_learning_paths: int = 1
    replications: int = 1
    master_seed: int = 0
    output_dir: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1 or self.n_learning_paths < 1:
            raise ConfigError("replications and n_learning_paths must be >= 1")
        self.y_star = list(np.atleast_1d(np.asarray(self.y_star, dtype=float)))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config {path}: {exc}") from exc

    def validate_dimensions(self) -> None:
        model = process_from_config(self.process)
        if len(self.y_star) != model.output_dim:
            raise ConfigError(
                f"y_star has {len(self.y_star)} coordinates, process emits {model.output_dim}"
            )


@dataclass
class RunResult:
    path: SamplePath
    total_cost: float
    mse: float
    error_ratios: np.ndarray | None
    per_path_costs: list
    diagnostics: dict


@dataclass
class SummaryStats:
    mean_mse: float
    std_mse: float
    mean_cost: float
    std_cost: float
    quartiles: list  # [min, q1, median, q3, max] of total cost
    ratio_vs_baseline: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Replication execution
# ---------------------------------------------------------------------------


def run_replication(config: ExperimentConfig, rep: int) -> RunResult:
    """Execute one replication with seeds derived from (master_seed, rep)."""
    model = process_from_config(config.process)
    y_star = np.asarray(config.y_star, dtype=float)
    controller = controller_from_config(config.controller, model, y_star)
    kind = config.controller.get("kind")
    per_path_costs = []
    path = None
    if isinstance(controller, OapeController):
        controller.learn(
            model,
            config.n_learning_paths,
            derive_int_seed(config.master_seed, replication=rep, tag="oape-learn"),
        )
        seed = derive_int_seed(config.master_seed, replication=rep, tag="path", index=0)
        model.reset(seed)
        path = controller.run_path(model, seed)
        per_path_costs.append(total_cost(path, y_star))
    else:
        if isinstance(controller, RlPgsController):
            controller.learn_offline(
                model,
                config.controller.get("n_offline_paths", controller.config.n_offline_paths),
                derive_int_seed(config.master_seed, replication=rep, tag="pgs-learn"),
            )
        for i in range(config.n_learning_paths):
            seed = derive_int_seed(config.master_seed, replication=rep, tag="path", index=i)
            path = simulate_path(model, controller, seed)
            per_path_costs.append(total_cost(path, y_star))
    ratios = None
    if np.all(y_star != 0.0):
        ratios = error_ratio_series(path, y_star)
    diagnostics = dict(getattr(controller, "diagnostics", {}) or {})
    diagnostics["kind"] = kind
    return RunResult(
        path=path,
        total_cost=total_cost(path, y_star),
        mse=mse(path, y_star),
        error_ratios=ratios,
        per_path_costs=per_path_costs,
        diagnostics=diagnostics,
    )


def _worker(args) -> tuple[int, RunResult]:
    config_dict, rep = args
    config = ExperimentConfig(**config_dict)
    return rep, run_replication(config, rep)


def run_replications(config: ExperimentConfig) -> list[RunResult]:
    """All replications, deterministic regardless of thread count."""
    reps = range(config.replications)
    if config.threads and config.threads > 1:
        cfg_dict = asdict(config)
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = dict(pool.map(_worker, [(cfg_dict, r) for r in reps]))
        return [results[r] for r in reps]
    return [run_replication(config, r) for r in reps]


# ---------------------------------------------------------------------------
# Aggregation and persistence
# ---------------------------------------------------------------------------


def summarize(results: list[RunResult], baseline_mean_mse: float | None = None) -> SummaryStats:
    mses = np.array([r.mse for r in results])
    costs = np.array([r.total_cost for r in results])
    q = np.percentile(costs, [0, 25, 50, 75, 100])
    ratio = None if baseline_mean_mse is None else float(mses.mean() / baseline_mean_mse)
    return SummaryStats(
        mean_mse=float(mses.mean()),
        std_mse=float(mses.std(ddof=1)) if len(results) > 1 else 0.0,
        mean_cost=float(costs.mean()),
        std_cost=float(costs.std(ddof=1)) if len(results) > 1 else 0.0,
        quartiles=[float(v) for v in q],
        ratio_vs_baseline=ratio,
    )


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_paths_csv(results: list[RunResult], out_path) -> None:
    first = results[0].path
    m_u = first.u.shape[1]
    m_y = first.y.shape[1]
    header = (
        ["replication", "t"]
        + [f"u_{j + 1}" for j in range(m_u)]
        + [f"y_{j + 1}" for j in range(m_y)]
        + ["d"]
    )
    lines = [",".join(header)]
    for rep, res in enumerate(results):
        p = res.path
        for t in range(p.horizon):
            row = [str(rep), str(t + 1)]
            row += [_fmt(v) for v in p.u[t]]
            row += [_fmt(v) for v in p.y[t]]
            row.append(_fmt(p.d[t]) if p.d is not None else "")
            lines.append(",".join(row))
    Path(out_path).write_text("\n".join(lines) + "\n")


def boxplot_rows(cost_matrix: np.ndarray) -> list[dict]:
    """1.5*IQR boxplot statistics per column of a (reps, paths) cost matrix."""
    rows = []
    for j in range(cost_matrix.shape[1]):
        col = cost_matrix[:, j]
        q1, med, q3 = np.percentile(col, [25, 50, 75])
        iqr = q3 - q1
        lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inliers = col[(col >= lo) & (col <= hi)]
        rows.append(
            {
                "path_index": j + 1,
                "q1": q1,
                "median": med,
                "q3": q3,
                "whisker_low": float(inliers.min()),
                "whisker_high": float(inliers.max()),
                "n_outliers": int(np.sum((col < lo) | (col > hi))),
            }
        )
    return rows


def write_boxplot_csv(results: list[RunResult], out_path) -> None:
    n_paths = min(len(r.per_path_costs) for r in results)
    mat = np.array([r.per_path_costs[:n_paths] for r in results])
    rows = boxplot_rows(mat)
    header = "path_index,q1,median,q3,whisker_low,whisker_high,n_outliers"
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                [str(row["path_index"])]
                + [_fmt(row[k]) for k in ("q1", "median", "q3", "whisker_low", "whisker_high")]
                + [str(row["n_outliers"])]
            )
        )
    Path(out_path).write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, baseline_mean_mse: float | None = None) -> SummaryStats:
    """Run all replications and persist artifacts if output_dir is set."""
    config.validate_dimensions()
    results = run_replications(config)
    stats = summarize(results, baseline_mean_mse)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_paths_csv(results, out / "paths.csv")
        write_boxplot_csv(results, out / "boxplot.csv")
        summary = {
            "version": __version__,
            "master_seed": config.master_seed,
            "replications": config.replications,
            "n_learning_paths": config.n_learning_paths,
            "process": config.process,
            "controller": config.controller,
            "y_star": list(config.y_star),
            "stats": stats.to_dict(),
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        audit = out / "audit"
        audit.mkdir(exist_ok=True)
        for rep, res in enumerate(results):
            payload = {
                "replication": rep,
                "total_cost": res.total_cost,
                "mse": res.mse,
                "per_path_costs": res.per_path_costs,
                "diagnostics": _jsonable(res.diagnostics),
            }
            (audit / f"{rep}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return stats


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def compare_controllers(configs: list[ExperimentConfig], labels: list[str], out_path=None) -> dict:
    """Paired per-replication costs for controllers sharing process, target, seeds."""
    base = configs[0]
    for cfg in configs[1:]:
        if (
            cfg.process.get("family") != base.process.get("family")
            or list(cfg.y_star) != list(base.y_star)
            or cfg.master_seed != base.master_seed
            or cfg.replications != base.replications
        ):
            raise ConfigError("compared controllers must share process, target, and seeds")
    report = {"labels": list(labels), "controllers": {}}
    cost_columns = []
    for cfg, label in zip(configs, labels):
        results = run_replications(cfg)
        costs = np.array([r.total_cost for r in results])
        cost_columns.append(costs)
        q1, med, q3 = np.percentile(costs, [25, 50, 75])
        iqr = q3 - q1
        report["controllers"][label] = {
            "costs": costs.tolist(),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "n_outliers": int(np.sum((costs < q1 - 1.5 * iqr) | (costs > q3 + 1.5 * iqr))),
        }
    if out_path is not None:
        lines = ["replication," + ",".join(labels)]
        for rep in range(base.replications):
            lines.append(
                ",".join([str(rep)] + [_fmt(col[rep]) for col in cost_columns])
            )
        Path(out_path).write_text("\n".join(lines) + "\n")
    return report
