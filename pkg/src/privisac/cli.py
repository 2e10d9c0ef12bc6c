"""Command-line entry point: ``privisac {simulate,sweep,verify}``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import PROFILES, ScenarioConfig, profile
from .errors import ConfigurationError
from .harness import (SweepSpec, SweepTable, emit_results, emit_trials, run_sweep, run_trials,
                      summarize)
from .verification import all_passed, run_checks

EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED = 0, 1, 2


def _load_config(args) -> ScenarioConfig:
    if args.config:
        return ScenarioConfig.from_json(args.config, default_profile=args.profile)
    return profile(args.profile or "desk")


def _values(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS lets the option appear before or after the subcommand
    common.add_argument("--profile", choices=sorted(PROFILES), default=argparse.SUPPRESS,
                        help="parameter profile (default: desk unless --config is given)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="privisac", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="paired baseline/framework trials at one configuration")
    sim.add_argument("--config", help="JSON file of ScenarioConfig fields")
    sim.add_argument("--trials", type=int, default=10)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True, help="CSV (per trial) or .json (summary)")

    sw = sub.add_parser("sweep", parents=[common], help="P_D and sensing SINR over P_max or the receiver count")
    sw.add_argument("--config")
    sw.add_argument("--variable", choices=["p_max", "n_rx"], required=True)
    sw.add_argument("--values", type=_values, required=True, help="comma-separated list")
    sw.add_argument("--trials", type=int, default=200)
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", required=True, help="output .csv or .json")

    ver = sub.add_parser("verify", parents=[common], help="run the oracle and property checks")
    ver.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.profile = getattr(args, "profile", None)
    args.verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            results = run_checks(args.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
            return EXIT_OK if all_passed(results) else EXIT_VERIFY_FAILED

        cfg = _load_config(args)
        seed = cfg.seed if args.seed is None else args.seed
        if args.command == "simulate":
            trials = run_trials(cfg, args.trials, seed, args.workers)
            row = summarize(trials)
            if str(args.out).lower().endswith(".json"):
                emit_results(SweepTable(rows=[row], metadata={
                    "config_hash": cfg.config_hash(), "seed": seed, "version": __version__,
                    "config": cfg.to_dict(), "trials": args.trials}), args.out)
            else:
                emit_trials(trials, args.out)
            print(f"P_D baseline {row['pd_baseline']:.3f}, framework {row['pd_framework']:.3f} "
                  f"({row['n_feasible']}/{row['n_trials']} feasible)")
        else:
            values = [int(v) for v in args.values] if args.variable == "n_rx" else args.values
            spec = SweepSpec(args.variable, values, args.trials, cfg)
            table = run_sweep(spec, args.workers, seed)
            emit_results(table, args.out)
            for row in table.rows:
                print(f"{args.variable}={row['sweep_value']}: P_D baseline {row['pd_baseline']:.3f}"
                      f", framework {row['pd_framework']:.3f}")
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
