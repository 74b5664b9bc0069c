"""Command-line entry point: ``difflab <command> --config run.ini``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness
from .config import DEFAULT_CONFIG, default_config, load_config
from .errors import ConfigError, DifflabError

COMMANDS = {
    "gen-data": harness.cmd_gen_data,
    "train-teacher": harness.cmd_train_teacher,
    "distill": harness.cmd_distill,
    "analyze": harness.cmd_analyze,
    "report": harness.cmd_report,
    "run": harness.cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="difflab",
                                description="Label smoothing / distillation diffusion lab")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment config file (default: built-in)")
        s.add_argument("--output", help="output directory (overrides [run] output_dir)")
        s.add_argument("--jobs", type=int, help="concurrent grid cells")
        s.add_argument("--seed", type=int, help="base seed (overrides [run] seed)")
        s.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("default-config", help="print the built-in config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(DEFAULT_CONFIG)
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be unsigned")
        cfg = cfg.with_overrides(output_dir=args.output, seed=args.seed, jobs=args.jobs)
        if cfg.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except DifflabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
