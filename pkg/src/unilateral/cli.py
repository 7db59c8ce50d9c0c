"""Command line entry point: one subcommand per experiment."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigurationError, NumericalFailure
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _float_list(text: str):
    try:
        return [eval_power(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def eval_power(v: str) -> float:
    """Parse ``1024``, ``1e6`` or ``2^10``."""
    v = v.strip()
    if "^" in v:
        base, exp = v.split("^", 1)
        return float(base) ** float(exp)
    return float(v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unilateral", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--seed", type=int, default=20240601, help="master seed")
        p.add_argument("--reps", type=int, default=None, help="replications")
        p.add_argument("--out", default=None, help="output directory for <experiment>.json/.csv")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
        if name in ("main-theorem", "mcm-energy", "tau-sandwich", "adaptive-slope"):
            p.add_argument("--T-list", type=_float_list, default=None, help="comma separated, e.g. 2^10,2^12")
        if name == "slln":
            p.add_argument("--V-list", type=_float_list, default=None)
        if name == "tau-sandwich":
            p.add_argument("--delta", type=float, default=0.25)
        if name in ("main-theorem", "mcm-energy", "adaptive-slope"):
            p.add_argument("--r", type=float, default=1.0)
            p.add_argument("--first-cell", type=float, default=None)
        if name in ("main-theorem", "mcm-energy", "slln", "tau-sandwich", "tau-ks", "adaptive-slope"):
            p.add_argument("--grid-points", type=int, default=None)
        if name == "stationary-fit":
            p.add_argument("--tau-max", type=float, default=1e4)
            p.add_argument("--dt", type=float, default=1e-3)
        if name == "oscillator":
            p.add_argument("--cutoff", type=float, default=14.0)
            p.add_argument("--fd-cells", type=int, default=8000)
            p.add_argument("--eigen-count", type=int, default=3)
    return parser


def config_from_args(args) -> ExperimentConfig:
    kw = dict(experiment=args.experiment, master_seed=args.seed, replications=args.reps, out=args.out,
              workers=args.workers)
    for attr in ("T_list", "V_list", "delta", "r", "first_cell", "grid_points", "tau_max", "dt", "cutoff",
                 "fd_cells", "eigen_count"):
        if hasattr(args, attr):
            kw[attr] = getattr(args, attr)
    return ExperimentConfig(**kw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args).resolved()
        if args.dry_run:
            print(json.dumps(cfg.to_dict(), indent=2))
            return EXIT_OK
        report = run_experiment(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if not cfg.out:
        print(report.to_json())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
