"""Command line entry point: ``byzsense run --config cfg.json --out results/``."""

import argparse
import logging
import sys
from dataclasses import replace

from byzsense import __version__
from byzsense.detection import ALL_METHODS, Method
from byzsense.errors import ConfigError, HarnessError, InvalidInputError
from byzsense.harness import load_config, run_scenario, sweep

log = logging.getLogger("byzsense")


def _methods(text):
    try:
        return tuple(Method(t.strip()) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _counts(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer: {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="byzsense", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="simulate a scenario (or a sweep) and write CSV results")
    run.add_argument("--config", required=True, help="JSON scenario configuration")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=_seed, help="override the configured master_seed")
    run.add_argument("--methods", type=_methods, default=ALL_METHODS,
                     help="comma-separated subset of mc,md,mad,sn,qn (default: all)")
    run.add_argument("--malicious", type=_counts,
                     help="comma-separated malicious counts; runs a sweep with one block per count")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for the simulation")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = replace(config, master_seed=args.seed)
        if not args.methods:
            raise ConfigError("methods", "at least one method is required")
        if args.malicious is not None:
            manifest = sweep(config, args.malicious, args.methods, args.out, args.jobs)
        else:
            manifest = run_scenario(config, args.methods, args.out, args.jobs)
    except HarnessError as exc:
        print(f"byzsense: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except InvalidInputError as exc:
        print(f"byzsense: internal invariant breach: {exc}", file=sys.stderr)
        return 5
    for path in manifest.artifact_paths:
        log.info("wrote %s", path)
    print(manifest.path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
