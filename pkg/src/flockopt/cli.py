"""Command-line entry point: ``flockopt --preset NAME`` or ``flockopt --config FILE``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 every
replicate diverged.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .analysis import bound_report
from .config import PRESET_NAMES, ConfigError, config_from_dict, config_parse, config_to_dict, preset, to_toml
from .harness import run_experiment, summarize, summary_text, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="flockopt",
        description="Simulate flocking-coupled asynchronous SGD against the N-sample centralized scheme.",
    )
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESET_NAMES + ("fig1", "ackley-case1", "ackley-case2"),
                     help="named experiment")
    src.add_argument("--config", metavar="PATH", help="TOML experiment file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--replicas", type=int, metavar="R", help="number of replicates")
    p.add_argument("--engine", choices=("event", "parallel", "sde"))
    p.add_argument("--mode", choices=("flocking", "centralized", "independent", "sde"),
                   help="update scheme; 'sde' keeps the configured scheme and integrates its continuum limit")
    p.add_argument("--horizon", type=float, help="simulated seconds")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default: standard output)")
    p.add_argument("--per-thread", action="store_true", help="add per-thread distance columns")
    p.add_argument("--bounds", action="store_true", help="print the bound report and exit")
    p.add_argument("--print-config", action="store_true", help="print the resolved config as TOML and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def resolve(args):
    cfg = config_parse(args.config) if args.config else preset(args.preset or "quad-bounds")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicates"] = args.replicas
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.engine is not None:
        changes["engine"] = args.engine
    if args.mode == "sde":
        changes["engine"] = "sde"
    elif args.mode is not None:
        changes["mode"] = args.mode
    if changes:
        cfg = config_from_dict({**config_to_dict(cfg), **changes})
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
    except (ConfigError, KeyError, OSError) as exc:
        print(f"flockopt: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(to_toml(cfg))
        return EXIT_OK
    if args.bounds:
        print(bound_report(cfg).to_text())
        return EXIT_OK

    result = run_experiment(cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_csv(result, fh, args.per_thread)
        report = sys.stdout
    else:
        write_csv(result, sys.stdout, args.per_thread)
        report = sys.stderr  # keep standard output a clean CSV
    summary = summarize(result)
    report.write(summary_text(summary))
    if result.stats is not None and result.stats.R > 0 and result.stats.diverged == result.stats.R:
        print("flockopt: every replicate diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
