"""``parmc`` command line entry point."""

from __future__ import annotations

import argparse
import sys

from .config import SCENARIOS, ConfigError, load_config
from .scenarios import RUNNERS

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parmc", description="Run a seeded parallel Monte Carlo scenario.")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", metavar="PATH", help="flat JSON file overriding scenario defaults")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int, help="macro-replications")
    ap.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    ap.add_argument("--check", action="store_true", help="exit 3 if any acceptance property fails")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.scenario, args.config, seed=args.seed, repetitions=args.reps, output_dir=args.out)
    except ConfigError as exc:
        print(f"parmc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = RUNNERS[cfg.scenario](cfg)
    for path in result.files:
        print(f"wrote {path}")
    for name, fr in result.fits.items():
        print(f"fit {name}: slope={fr.slope:.4f} intercept={fr.intercept:.4f} r2={fr.r_squared:.4f}")
    for c in result.checks:
        print(c.line())
    if args.check and not result.passed:
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
