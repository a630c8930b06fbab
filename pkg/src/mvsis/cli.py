"""Command line entry point: mvsis <experiment> [--config PATH] [--seed N] [--out DIR]."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .engine import NumericAbort
from .harness import EXPERIMENTS, ConfigError, default_config, load_config, run_experiment

log = logging.getLogger("mvsis")


def _parser():
    ap = argparse.ArgumentParser(prog="mvsis", description="Mean-field SIS experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="config file ([experiment] and [model] sections)")
    ap.add_argument("--seed", type=int, help="64-bit seed, overrides the config")
    ap.add_argument("--out", help="output directory, overrides the config")
    ap.add_argument("--gnuplot", action="store_true", help="also write plot.gp for means.csv")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.experiment) if args.config else default_config(args.experiment)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out:
            over["out"] = args.out
        if args.gnuplot:
            over["gnuplot"] = True
        if over:
            cfg = replace(cfg, **over)
        files = run_experiment(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NumericAbort as err:
        print(f"numeric abort: {err}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
