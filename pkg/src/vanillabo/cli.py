"""Command line entry point: ``vanillabo {run,mig,prop1,locality,report}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import default_config, parse_config
from .exceptions import ConfigError
from .harness import COMMANDS, execute


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vanillabo", description="Vanilla BO experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value config file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="seed base; repetition i uses seed + i")
    p.add_argument("--reps", type=int, help="number of repetitions")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (env VANILLABO_WORKERS wins)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        cfg = parse_config(args.config) if args.config else default_config()
        overrides = {k: getattr(args, k) for k in ("seed", "reps", "workers") if getattr(args, k) is not None}
        if overrides:
            cfg = cfg.with_overrides(**overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    status = execute(args.command, cfg, args.out)
    if status:
        print(f"{args.command}: every repetition failed", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
