"""Command-line entry point: ``epibandit <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or input error, 3 missing
prerequisite data (ground truth or benchmark records).
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .errors import ConfigError, MissingGroundTruth, MissingRecords, Subcritical

log = logging.getLogger("epibandit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML file with experiment and scenario keys")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--paper-scale", action="store_true",
                        help="1000 ground-truth evaluations per strategy instead of 200")
    parser.add_argument("--workers", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epibandit",
        description="Fixed-budget best-arm identification of epidemic mitigation strategies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gt = sub.add_parser("ground-truth", help="evaluate every strategy many times per R0")
    _common(gt)
    bench = sub.add_parser("benchmark", help="success rate of each algorithm per budget")
    _common(bench)
    bench.add_argument("--timing", action="store_true",
                       help="fill the wall_ms column (makes output non-reproducible)")
    cal = sub.add_parser("calibration", help="bin TTTS probability of success against correctness")
    _common(cal)
    thr = sub.add_parser("threshold", help="extinction probability and fade-out threshold")
    _common(thr)
    thr.add_argument("--r0", type=float, required=True)
    thr.add_argument("--dispersion", type=float, default=0.5)
    thr.add_argument("--controlled-fraction", type=float, default=0.0)
    thr.add_argument("--cutoff", type=float, default=1e-10)
    return parser


def _load(args) -> tuple[harness.ExperimentConfig, object]:
    overrides = {"master_seed": args.seed, "output_dir": args.out, "workers": args.workers}
    if args.paper_scale:
        overrides["ground_truth_runs"] = 1000
    if getattr(args, "timing", False):
        overrides["record_timing"] = True
    return harness.load_config(args.config, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "threshold":
            try:
                p_ext, t0 = harness.cmd_threshold(args.r0, args.dispersion,
                                                  args.controlled_fraction, args.cutoff)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            print(f"p_ext {p_ext!r}")
            print(f"T0 {t0}")
            return EXIT_OK

        config, scenario = _load(args)
        if args.command == "ground-truth":
            truth = harness.cmd_ground_truth(config, scenario)
            for r0 in truth.r0_values():
                print(f"r0={r0:g} best strategy {truth.best_arm(r0)}")
        elif args.command == "benchmark":
            records = harness.cmd_benchmark(config, scenario)
            print(f"wrote {len(records)} run records to {config.out}")
        elif args.command == "calibration":
            rows = harness.cmd_calibration(config)
            print(f"wrote {len(rows)} calibration rows to {config.out}")
    except (ConfigError, Subcritical) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingGroundTruth, MissingRecords) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
