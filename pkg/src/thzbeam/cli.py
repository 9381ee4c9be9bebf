"""Command-line entry point: ``thzbeam <subcommand> [--config F] [--seed N] [--out P]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config, parse_overrides
from .experiments import run_experiment
from .lut import FingerprintMismatch, load_lut

COMMANDS = {
    "lut-build": ("lut_build", "optimize beam parameters on the (distance, deviation) grid"),
    "beam-pattern": ("beam_pattern", "gain versus angle of optimized and narrow beams"),
    "pareto": ("pareto", "rate/outage trade-off over an alpha sweep, both solvers"),
    "contour": ("contour", "optimal beam parameters over distance and deviation"),
    "absorption-sweep": ("absorption_sweep", "optimal beams across carrier frequencies"),
    "baseline-compare": ("baseline_compare", "proposed beams against the comparison beamformers"),
    "track-trace": ("tracking_trace", "per-slot trace of one tracking run"),
    "track-cdf": ("tracking_cdf", "achieved-rate CDFs of the tracking schemes"),
    "outage-overhead": ("outage_vs_overhead", "outage versus pilot overhead grid"),
}
NEEDS_LUT = {"track-trace", "track-cdf", "outage-overhead"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thzbeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", help="scenario file (key = value)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", metavar="PATH", required=True, help="output file")
        p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key; repeatable")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in NEEDS_LUT:
            p.add_argument("--lut", action="append", default=[], metavar="PATH",
                           help="lookup table from lut-build; repeatable")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = COMMANDS[args.command][0]
    try:
        cfg = parse_config(args.config, parse_overrides(args.overrides))
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        luts = [load_lut(p) for p in getattr(args, "lut", [])]
        run_experiment(kind, cfg, args.out, luts=luts, workers=args.workers)
    except (ConfigError, FingerprintMismatch, ValueError, OSError) as exc:
        print(f"thzbeam {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
