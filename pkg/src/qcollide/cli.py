"""Command-line entry point: ``qcollide <command> --config PATH``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import ConfigError, load_config
from .io import fmt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_VERIFY = 4

COMMANDS = {
    "collide": experiments.run_collide,
    "lindblad": experiments.run_lindblad,
    "rectify": experiments.run_rectify,
    "noise-sweep": experiments.run_noise_sweep,
    "emit": experiments.run_emit,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcollide", description="Collisional simulation of a boundary-driven XXZ chain.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH", help="INI run configuration")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, metavar="N", help="noise seed (overrides [noise] seed)")
        if name == "emit":
            p.add_argument("--profile", metavar="NAME", help="timing profile name or file")
    return parser


def _report(result) -> None:
    items = result if isinstance(result, dict) else vars(result)
    for k, v in items.items():
        print(f"{k}={fmt(v)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = cfg.with_out(args.out)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = cfg.with_seed(args.seed)
        if args.command == "emit" and args.profile:
            result = experiments.run_emit(cfg, profiles=[args.profile])
        else:
            result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except experiments.PhysicsError as exc:
        print(f"physics invariant violated: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except experiments.VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    _report(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
