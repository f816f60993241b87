"""Preset experiment protocols: comparison tables, figure data, theory report.

Each function is a thin, parameterized wrapper over the harness so the
CLI presets and the acceptance suite run exactly the same code paths.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate

from .controllers import controller_from_config
from .errors import ConfigError
from .estimation import RatioMoments
from .harness import (
    ExperimentConfig,
    _fmt,
    boxplot_rows,
    compare_controllers,
    error_ratio_series,
    run_replications,
    summarize,
)
from .processes import process_from_config
from .ratio_normal import RatioDistribution
from .rng import derive_int_seed, make_rng
from .theory import DEFAULT_BOUND_BATTERY, theorem1_rate_check, theorem2_bound_check


def load_preset(name: str) -> dict:
    """Load one of the checked-in experiment configs by stem name."""
    ref = resources.files("r2rcontrol.configs").joinpath(f"{name}.json")
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}")
    return json.loads(ref.read_text())


def preset_config(name: str, **overrides) -> ExperimentConfig:
    raw = load_preset(name)
    raw.update(overrides)
    return ExperimentConfig(**raw)


# ---------------------------------------------------------------------------
# Table protocols
# ---------------------------------------------------------------------------


def table1_experiment(
    seed: int,
    replications: int = 50,
    n_grid=(10, 30, 50, 100),
    out_dir=None,
    threads: int = 1,
) -> dict:
    """RL versus OAPE mean/std of final-path MSE over a grid of N."""
    rows = []
    for n in n_grid:
        rl_cfg = preset_config(
            "cmp_rl",
            master_seed=seed,
            replications=replications,
            n_learning_paths=int(n),
            threads=threads,
        )
        oape_cfg = preset_config(
            "cmp_oape",
            master_seed=seed,
            replications=replications,
            n_learning_paths=int(n),
            threads=threads,
        )
        rl = summarize(run_replications(rl_cfg))
        oape = summarize(run_replications(oape_cfg))
        rows.append(
            {
                "n_paths": int(n),
                "rl_mean_mse": rl.mean_mse,
                "oape_mean_mse": oape.mean_mse,
                "rl_std_mse": rl.std_mse,
                "oape_std_mse": oape.std_mse,
            }
        )
    report = {"seed": seed, "replications": replications, "rows": rows}
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["n_paths,rl_mean_mse,oape_mean_mse,rl_std_mse,oape_std_mse"]
        for r in rows:
            lines.append(
                ",".join(
                    [str(r["n_paths"])]
                    + [_fmt(r[k]) for k in ("rl_mean_mse", "oape_mean_mse", "rl_std_mse", "oape_std_mse")]
                )
            )
        (out / "table1.csv").write_text("\n".join(lines) + "\n")
        (out / "table1.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def table2_experiment(seed: int, replications: int = 30, out_dir=None, threads: int = 1) -> dict:
    """No-control versus policy-gradient control on the Wiener and gamma processes."""
    rows = {}
    for case, null_name, pgs_name in (
        ("wiener", "wiener_null", "wiener_pgs"),
        ("gamma", "gamma_null", "gamma_pgs"),
    ):
        null_cfg = preset_config(null_name, master_seed=seed, replications=replications, threads=threads)
        pgs_cfg = preset_config(pgs_name, master_seed=seed, replications=replications, threads=threads)
        null_stats = summarize(run_replications(null_cfg))
        pgs_stats = summarize(run_replications(pgs_cfg))
        rows[case] = {
            "no_control_mean_mse": null_stats.mean_mse,
            "no_control_std_mse": null_stats.std_mse,
            "rl_mean_mse": pgs_stats.mean_mse,
            "rl_std_mse": pgs_stats.std_mse,
            "mean_ratio": pgs_stats.mean_mse / null_stats.mean_mse,
            "std_ratio": pgs_stats.std_mse / null_stats.std_mse,
        }
    report = {"seed": seed, "replications": replications, "cases": rows}
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["case,no_control_mean_mse,rl_mean_mse,mean_ratio,no_control_std_mse,rl_std_mse,std_ratio"]
        for case, r in rows.items():
            lines.append(
                ",".join(
                    [case]
                    + [
                        _fmt(r[k])
                        for k in (
                            "no_control_mean_mse",
                            "rl_mean_mse",
                            "mean_ratio",
                            "no_control_std_mse",
                            "rl_std_mse",
                            "std_ratio",
                        )
                    ]
                )
            )
        (out / "table2.csv").write_text("\n".join(lines) + "\n")
        (out / "table2.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


# ---------------------------------------------------------------------------
# Figure protocols
# ---------------------------------------------------------------------------


def figure2_experiment(
    seed: int, replications: int = 200, n_paths: int = 30, out_dir=None, threads: int = 1
) -> dict:
    """Per-path-index total-cost distributions: RL controller versus known-parameter EWMA."""
    report = {"seed": seed, "replications": replications, "n_paths": n_paths}
    for label, preset in (("rl", "cmp_rl"), ("ewma", "cmp_ewma")):
        cfg = preset_config(
            preset,
            master_seed=seed,
            replications=replications,
            n_learning_paths=n_paths,
            threads=threads,
        )
        results = run_replications(cfg)
        mat = np.array([r.per_path_costs for r in results])
        rows = boxplot_rows(mat)
        report[label] = {
            "per_path_median": [r["median"] for r in rows],
            "final_median": rows[-1]["median"],
            "total_outliers": int(sum(r["n_outliers"] for r in rows)),
        }
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            lines = ["path_index,q1,median,q3,whisker_low,whisker_high,n_outliers"]
            for r in rows:
                lines.append(
                    ",".join(
                        [str(r["path_index"])]
                        + [_fmt(r[k]) for k in ("q1", "median", "q3", "whisker_low", "whisker_high")]
                        + [str(r["n_outliers"])]
                    )
                )
            (out / f"figure2_{label}.csv").write_text("\n".join(lines) + "\n")
    if out_dir:
        (Path(out_dir) / "figure2.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def figure5_experiment(seed: int, replications: int = 30, out_dir=None, threads: int = 1) -> dict:
    """GHR versus policy-gradient-search total-cost distributions on the ARIMA process."""
    ghr_cfg = preset_config("arima_ghr", master_seed=seed, replications=replications, threads=threads)
    pgs_cfg = preset_config("arima_pgs", master_seed=seed, replications=replications, threads=threads)
    out_csv = None
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        out_csv = out / "figure5.csv"
    report = compare_controllers([ghr_cfg, pgs_cfg], ["ghr", "rl_pgs"], out_path=out_csv)
    report["seed"] = seed
    if out_dir:
        (Path(out_dir) / "figure5.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def quadratic_error_ratio_experiment(
    seed: int, n_learning_paths: int = 1000, n_eval_paths: int = 50, out_dir=None
) -> dict:
    """Learn the quadratic CMP model, then measure per-period error ratios.

    One long-learning replication: the controller keeps its pooled dataset
    across all learning paths, then the next ``n_eval_paths`` paths are
    scored by |(y - y*)/y*| per output coordinate.
    """
    cfg = preset_config("quadratic_cmp_rl", master_seed=seed, n_learning_paths=n_learning_paths)
    model = process_from_config(cfg.process)
    y_star = np.asarray(cfg.y_star)
    controller = controller_from_config(cfg.controller, model, y_star)
    for i in range(n_learning_paths):
        path_seed = derive_int_seed(seed, replication=0, tag="quad-learn", index=i)
        model.reset(path_seed)
        controller.run_path(model, path_seed)
    ratios = []
    for i in range(n_eval_paths):
        path_seed = derive_int_seed(seed, replication=0, tag="quad-eval", index=i)
        model.reset(path_seed)
        path = controller.run_path(model, path_seed)
        ratios.append(np.abs(error_ratio_series(path, y_star)))
    ratios = np.concatenate(ratios, axis=0)  # (n_eval*T, 2)
    report = {
        "seed": seed,
        "n_learning_paths": n_learning_paths,
        "n_eval_paths": n_eval_paths,
        "frac_y1_below_0.1": float(np.mean(ratios[:, 0] < 0.1)),
        "frac_y2_below_0.2": float(np.mean(ratios[:, 1] < 0.2)),
        "max_ratio_y1": float(ratios[:, 0].max()),
        "max_ratio_y2": float(ratios[:, 1].max()),
    }
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "quadratic_error_ratios.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


# ---------------------------------------------------------------------------
# Theory report
# ---------------------------------------------------------------------------


def _ks_distance(dist: RatioDistribution, n_draws: int, rng) -> float:
    draws = np.sort(dist.rvs(n_draws, rng))
    cdf_vals = dist.cdf(draws)
    i = np.arange(1, n_draws + 1)
    return float(
        max(np.max(i / n_draws - cdf_vals), np.max(cdf_vals - (i - 1) / n_draws))
    )


def theory_check(
    seed: int,
    out_dir=None,
    n_bound_trials: int = 10_000,
    rate_replications: int = 200,
    ks_draws: int = 200_000,
) -> dict:
    """Bound battery, estimator-rate check, and ratio-distribution diagnostics."""
    rng = make_rng(seed, tag="theory-check")
    report: dict = {"seed": seed}

    bounds = []
    for i, cfg in enumerate(DEFAULT_BOUND_BATTERY):
        for eta in (0.1, 0.5, 1.0):
            rep = theorem2_bound_check(cfg, eta, n_bound_trials, derive_int_seed(seed, replication=i, tag="bound"))
            entry = rep.to_dict()
            entry["config"] = cfg.name
            bounds.append(entry)
    report["bounds"] = bounds

    rate = theorem1_rate_check([25, 50, 100, 200, 400], rate_replications, seed)
    report["rate"] = rate.to_dict()

    moments = RatioMoments(mu1=1.5, mu2=3.0, sigma1=0.8, sigma2=0.7, sigma12=0.2)
    dist = RatioDistribution(moments)
    center = moments.mu1 / moments.mu2
    left, _ = integrate.quad(dist.pdf, -np.inf, center, limit=200)
    right, _ = integrate.quad(dist.pdf, center, np.inf, limit=200)
    integral = left + right
    grid = np.linspace(-3.0, 4.0, 201)
    F = dist.cdf(grid)
    F_star = dist.cdf_normal_approx(grid)
    report["ratio_distribution"] = {
        "pdf_integral": float(integral),
        "ks_distance": _ks_distance(dist, ks_draws, rng),
        "max_normal_approx_gap": float(np.max(np.abs(F - F_star))),
        "normal_approx_bound": dist.approx_error_bound,
    }

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "theory_report.json").write_text(json.dumps(report, indent=2) + "\n")
        lines = ["u,cdf,cdf_normal_approx,pdf"]
        pdf_vals = dist.pdf(grid)
        for u, f, fs, p in zip(grid, F, F_star, pdf_vals):
            lines.append(",".join(_fmt(v) for v in (u, f, fs, p)))
        (out / "theory_grid.csv").write_text("\n".join(lines) + "\n")
    return report
