"""Command-line front end: preset experiments plus generic config-driven runs."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, R2RError
from .harness import ExperimentConfig, run_experiment
from . import experiments


def _out_dir(args) -> str:
    if args.out:
        return args.out
    env = os.environ.get("R2R_OUTPUT_DIR")
    if env:
        return env
    return "r2r-output"


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # keep as string
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return raw


def _load_config(args) -> ExperimentConfig:
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        raw = json.load(fh)
    raw = _apply_overrides(raw, args.set or [])
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    raw["output_dir"] = _out_dir(args)
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad config key in {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="r2rctl", description="Run-to-run process control experiments"
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p, config_required=False):
        if config_required:
            p.add_argument("--config", required=True, help="experiment config JSON")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config entry (dotted keys allowed)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory (or $R2R_OUTPUT_DIR)")
        p.add_argument("--threads", type=int, default=None, help="parallel replications")
        p.add_argument("--replications", type=int, default=None)

    add_common(sub.add_parser("run", help="run an experiment config"), config_required=True)
    add_common(sub.add_parser("simulate", help="simulate paths for a config"), config_required=True)
    add_common(sub.add_parser("table1", help="RL vs OAPE mean/std MSE grid"))
    add_common(sub.add_parser("table2", help="no-control vs PGS on Wiener/gamma"))
    add_common(sub.add_parser("figure2", help="RL vs EWMA cost distributions"))
    add_common(sub.add_parser("figure5", help="GHR vs PGS cost distributions"))
    add_common(sub.add_parser("theory-check", help="bound battery, rate check, ratio diagnostics"))
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "version":
        print(__version__)
        return 0
    try:
        threads = getattr(args, "threads", None) or 1
        seed = args.seed if args.seed is not None else 20260826
        out = _out_dir(args)
        if args.command in ("run", "simulate"):
            config = _load_config(args)
            stats = run_experiment(config)
            print(json.dumps(stats.to_dict(), indent=2))
        elif args.command == "table1":
            report = experiments.table1_experiment(
                seed, replications=args.replications or 50, out_dir=out, threads=threads
            )
            print(json.dumps(report, indent=2))
        elif args.command == "table2":
            report = experiments.table2_experiment(
                seed, replications=args.replications or 30, out_dir=out, threads=threads
            )
            print(json.dumps(report, indent=2))
        elif args.command == "figure2":
            report = experiments.figure2_experiment(
                seed, replications=args.replications or 200, out_dir=out, threads=threads
            )
            print(json.dumps(report, indent=2))
        elif args.command == "figure5":
            report = experiments.figure5_experiment(
                seed, replications=args.replications or 30, out_dir=out, threads=threads
            )
            print(json.dumps(report, indent=2))
        elif args.command == "theory-check":
            report = experiments.theory_check(seed, out_dir=out)
            print(json.dumps(report, indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except R2RError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
