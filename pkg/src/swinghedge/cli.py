"""Command line front-end.

Four subcommands (simulate, price, hedge, baseline) run one experiment each
from either a JSON config file or a named canned profile, write artifacts to
--out and print the run summary to stdout.  Exit codes: 0 success, 1 runtime
failure inside a compute module, 2 usage or validation error.
"""

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, parse_config, validate_config
from .profiles import get_profile, list_profiles
from .pricer import Seeds
from .runner import run_experiment

SEED_NAMES = tuple(Seeds.__dataclass_fields__)


def _parse_seed_override(text: str):
    name, sep, value = text.partition("=")
    if not sep or name not in SEED_NAMES:
        raise argparse.ArgumentTypeError(
            f"expected NAME=INT with NAME in {'/'.join(SEED_NAMES)}: {text!r}"
        )
    try:
        return name, int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"seed value must be an integer: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swinghedge",
        description="Monte-Carlo policy-gradient option pricing and "
                    "fixed-cost hedging.",
    )
    parser.add_argument("--list-profiles", action="store_true",
                        help="print canned profile names and exit")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        source = p.add_mutually_exclusive_group()
        source.add_argument("--config", help="JSON config file")
        source.add_argument("--profile", help="canned profile name")
        p.add_argument("--out", help="output directory for artifacts")
        p.add_argument("--seed-override", type=_parse_seed_override,
                       action="append", default=[], metavar="NAME=INT",
                       help="replace one named seed (repeatable)")
        p.add_argument("--traces", action="store_true",
                       help="also write per-path decision traces")

    add_common(sub.add_parser("simulate", help="write simulated paths"))
    add_common(sub.add_parser("price", help="train an exercise policy"))
    add_common(sub.add_parser("hedge", help="train an impulse hedge"))
    baseline = sub.add_parser("baseline", help="run a reference method")
    baseline.add_argument("method", choices=["bs", "crr", "lsm", "ww", "naive"])
    add_common(baseline)
    return parser


def _load_config(args) -> dict:
    if args.profile:
        config = get_profile(args.profile)
    elif args.config:
        with open(args.config) as fh:
            config = parse_config(fh.read())
    else:
        raise ConfigError("give one of --config or --profile")

    revalidate = False
    if args.command == "baseline":
        config.setdefault("baseline", {})["method"] = args.method
        revalidate = True
    if config["kind"] != args.command:
        raise ConfigError(
            f"config kind {config['kind']!r} does not match the "
            f"{args.command!r} subcommand")
    if args.seed_override:
        seeds = config.setdefault("seeds", {})
        for name, value in args.seed_override:
            seeds[name] = value
        revalidate = True
    return validate_config(config) if revalidate else config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_profiles:
        print("\n".join(list_profiles()))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("swinghedge: error: a subcommand is required", file=sys.stderr)
        return 2

    try:
        config = _load_config(args)
    except (ConfigError, KeyError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) else exc
        print(f"swinghedge: error: {message}", file=sys.stderr)
        return 2

    try:
        summary = run_experiment(config, out_dir=args.out,
                                 profile=args.profile,
                                 write_traces=args.traces)
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"swinghedge: error: {exc}", file=sys.stderr)
        return 1
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
