"""Command-line entry point: ``sdwave CONFIG [-o DIR] [--seed N] [-v|-q]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .scenarios import SCENARIOS, parse_config, run_scenario, validate_config


def build_parser():
    p = argparse.ArgumentParser(
        prog="sdwave",
        description="Run one structurally damped wave scenario from a YAML config.",
        epilog="scenarios: " + ", ".join(SCENARIOS),
    )
    p.add_argument("config", help="path to the YAML scenario config")
    p.add_argument("-o", "--output-dir", help="override the config's output_dir")
    p.add_argument("--seed", type=int, help="override the config's rng seed")
    p.add_argument("--no-timing", action="store_true", help="write null wall times so outputs are byte-identical across runs")
    p.add_argument("--echo", action="store_true", help="print the filled-in config and exit")
    v = p.add_mutually_exclusive_group()
    v.add_argument("-v", "--verbose", action="count", default=0, help="more progress output")
    v.add_argument("-q", "--quiet", action="store_true", help="only errors")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.INFO if args.verbose else logging.WARNING)
    if args.verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"sdwave: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            raw = cfg.echo()
            raw["seed"] = args.seed
            cfg = validate_config(raw)
    except ConfigError as exc:
        print("sdwave: invalid config:", file=sys.stderr)
        for prob in exc.problems:
            print(f"  - {prob}", file=sys.stderr)
        return 2

    if args.echo:
        import yaml

        print(yaml.safe_dump(cfg.echo(), sort_keys=False), end="")
        return 0

    status, summary = run_scenario(cfg, args.output_dir, timing=not args.no_timing)
    for a in summary["assertions"]:
        if not args.quiet:
            flag = "PASS" if a["passed"] else ("FAIL" if a["hard"] else "WARN")
            print(f"{flag} {a['name']}: {a['value']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
