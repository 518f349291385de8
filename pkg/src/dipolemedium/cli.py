"""Command-line entry point: ``dipolemedium <subcommand> --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 interrupted (completed realizations are kept and a rerun resumes).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError, DipoleMediumError
from .runner import (
    RunInterrupted,
    estimate_cost,
    run_dispersion,
    run_mie_compare,
    run_profile_dump,
    run_single_atom,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 4

SUBCOMMANDS = {
    "dispersion": "dispersion",
    "profile": "profile-dump",
    "mie-compare": "mie-compare",
    "single-atom": "single-atom-test",
    "dry-run": None,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dipolemedium", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", help="output directory (overrides [run] output_dir)")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--seed", type=int, help="master seed override")
        if name == "profile":
            p.add_argument("--detuning", type=float, help="detuning to dump (default: first of grid)")
        if name == "mie-compare":
            p.add_argument("--permittivity", help="dispersion CSV providing eps(delta)")
    return parser


def _progress(done, total):
    logging.getLogger("dipolemedium").info("realization %d/%d", done, total)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    overrides = {"workers": args.workers, "master_seed": args.seed, "output_dir": args.out, "mode": SUBCOMMANDS[args.command]}
    try:
        config = load_config(args.config, **overrides)
        if args.command == "dry-run":
            print(json.dumps(estimate_cost(config), indent=2))
            return EXIT_OK
        if args.command == "dispersion":
            rows = run_dispersion(config, progress=_progress)
        elif args.command == "profile":
            run_profile_dump(config, args.detuning, progress=_progress)
            rows = []
        elif args.command == "mie-compare":
            if args.permittivity:
                config = config.replace(permittivity_table=args.permittivity)
            rows = run_mie_compare(config, progress=_progress)
        else:
            rows = run_single_atom(config)
        print(f"wrote {len(rows)} rows to {config.output_dir}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunInterrupted as exc:
        print(f"interrupted: {exc}", file=sys.stderr)
        return EXIT_INTERRUPTED
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except DipoleMediumError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
