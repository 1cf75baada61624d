"""Command-line entry point: ``lbmarl {train,evaluate,plot,validate}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import yaml

from ..errors import ConfigurationError, LBMarlError
from .config import METHODS, OUT_ENV_VAR, PROFILES, build_config, read_config_data
from .experiment import SUMMARY_COLUMNS, evaluate_experiment, fmt, run_experiment
from .plots import emit_plots

log = logging.getLogger("lbmarl")


def parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be a comma-separated list of integers, got {text!r}")


def parse_methods(text: str) -> list[str]:
    return list(METHODS) if text == "all" else [m.strip() for m in text.split(",") if m.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lbmarl",
        description="Multi-agent load balancing: simulate, train, evaluate and plot.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", help="YAML experiment config")
        p.add_argument("--profile", choices=sorted(PROFILES), help="defaults profile (desk or full)")
        p.add_argument("--method", help=f"one of {', '.join(METHODS)}; a comma list or 'all'")
        p.add_argument("--scenario", help="builtin scenario (A, B, C-1, C-2, C-3) or a scenario file")
        p.add_argument("--seeds", type=parse_seeds, help="comma-separated seeds, e.g. 0,1,2")
        p.add_argument("--episodes", type=int, help="training episodes per seed")
        p.add_argument("--out", help=f"output root (default: ${OUT_ENV_VAR} or ./runs)")

    p = sub.add_parser("train", help="train every seed, then evaluate the frozen policies")
    run_flags(p)
    p.add_argument("--no-plots", action="store_true", help="skip the SVG figures")
    p = sub.add_parser("evaluate", help="evaluate saved checkpoints (or a baseline) without training")
    run_flags(p)
    p = sub.add_parser("plot", help="render SVG figures from the CSVs under an output root")
    p.add_argument("--out", help=f"output root to scan (default: ${OUT_ENV_VAR} or ./runs)")
    p.add_argument("--figures", help="directory for the SVGs (default: <out>/figures)")
    p = sub.add_parser("validate", help="check a config file and print it with defaults filled in")
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--profile", choices=sorted(PROFILES), help="defaults profile")
    return parser


def resolve_configs(args) -> list:
    """One validated config per requested method; flags override the config file."""
    data = read_config_data(args.config) if args.config else {}
    profile = args.profile or data.get("profile") or "desk"
    if not args.config and "seeds" not in data:
        data["seeds"] = list(PROFILES[profile]["seeds"])
    for key in ("scenario", "seeds", "episodes", "out"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    methods = parse_methods(args.method) if args.method else [data.get("method", "ma3c")]
    return [build_config({**data, "method": m}, profile) for m in methods]


def print_summary(rows, stream=None) -> None:
    w = csv.writer(stream or sys.stdout, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in rows:
        w.writerow([fmt(row[c]) for c in SUMMARY_COLUMNS])


def cmd_train(args) -> int:
    configs = resolve_configs(args)
    rows = []
    for cfg in configs:
        log.info("training %s on %s, seeds %s, %d episodes", cfg.method, cfg.scenario, cfg.seeds, cfg.episodes)
        rows.append(run_experiment(cfg, plots=False)["summary_row"])
    if not args.no_plots:
        for path in emit_plots(configs[0].out):
            log.info("wrote %s", path)
    print_summary(rows)
    return 0


def cmd_evaluate(args) -> int:
    rows = [evaluate_experiment(cfg)["summary_row"] for cfg in resolve_configs(args)]
    print_summary(rows)
    return 0


def cmd_plot(args) -> int:
    from .config import default_out

    for path in emit_plots(args.out or default_out(), args.figures):
        print(path)
    return 0


def cmd_validate(args) -> int:
    data = read_config_data(args.config)
    cfg = build_config(data, args.profile)
    print(f"{args.config}: valid")
    print(yaml.safe_dump(cfg.as_dict(), sort_keys=True), end="")
    return 0


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "plot": cmd_plot, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("lbmarl.env").setLevel(max(level, logging.ERROR))  # clamp warnings are per step
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LBMarlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
