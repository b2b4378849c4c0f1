"""Command-line interface.

Verbs:
  run       simulate one scenario and write CSV/JSON outputs
  sweep     independent runs over a parameter range
  validate  run the built-in validation suite
  map-dump  write the attachment map as CSV

Exit codes: 0 success, 2 configuration error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import math
import sys

from . import runner, validation
from .scenario import PRESETS, ConfigError, build_world, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="paper_table1",
                   help="scenario YAML path or preset name "
                        f"(presets: {', '.join(sorted(PRESETS))})")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    p.add_argument("--duration", type=float, default=None,
                   help="override run.duration_s (seconds)")
    p.add_argument("--variant", choices=["local", "global"], default=None,
                   help="override son.variant")


def _parse_value(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhson", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    _add_config_args(p_run)
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--plots", action="store_true",
                       help="also render load/CIO/FTT/KPI charts (needs matplotlib)")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--out", default="out", help="output directory")
    p_sweep.add_argument("--param", required=True, choices=runner.SWEEP_PARAMETERS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 10,50,inf")

    p_val = sub.add_parser("validate", help="run the validation suite")
    _ = p_val

    p_map = sub.add_parser("map-dump", help="dump the attachment map as CSV")
    _add_config_args(p_map)
    p_map.add_argument("--out", default="attachment_map.csv", help="output CSV path")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "validate":
        return EXIT_OK if validation.run_validation() else EXIT_VALIDATION

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            out = runner.run(cfg, seed=args.seed, out_dir=args.out,
                             variant=args.variant, duration_s=args.duration)
            print(f"run complete: {out.kpis.n_flows} flows, "
                  f"MUT={out.kpis.mut_mbps}, CET={out.kpis.cet_mbps} -> {args.out}")
            if args.plots:
                from .plots import render_run
                render_run(out, args.out)
            return EXIT_OK
        if args.command == "sweep":
            values = [_parse_value(v) for v in args.values.split(",") if v]
            runner.sweep(cfg, args.param, values, seed=args.seed,
                         out_dir=args.out, variant=args.variant,
                         duration_s=args.duration)
            print(f"sweep complete -> {args.out}")
            return EXIT_OK
        if args.command == "map-dump":
            world = build_world(cfg)
            world.amap.write_csv(args.out)
            print(f"attachment map ({world.amap.n_pixels} pixels) -> {args.out}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
