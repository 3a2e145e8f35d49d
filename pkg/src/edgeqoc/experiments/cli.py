"""``edgeqoc`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 simulation error,
4 infeasible allocation.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from ..allocator import SCHEMES, scheme_name
from ..errors import InfeasibleError, InvalidConfigError, SimulationError
from .commands import (
    cmd_allocate,
    cmd_build_table,
    cmd_compare_schemes,
    cmd_prb,
    cmd_tdd_sweep,
    cmd_tradeoff,
)
from .config import PROFILES, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_INFEASIBLE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _common(suppress: bool) -> argparse.ArgumentParser:
    """Global flags, accepted before or after the subcommand."""
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file layered over the defaults", **kw)
    common.add_argument("--seed", type=_u64, help="master seed (overrides the config)", **kw)
    common.add_argument("--out", help="output directory (overrides the config)", **kw)
    common.add_argument(
        "--profile", choices=PROFILES, help="parameter profile", **(kw or {"default": "desk"})
    )
    common.add_argument("--runs", type=_positive, help="Monte Carlo runs per point", **kw)
    common.add_argument(
        "--timings",
        action="store_true",
        help="report solve times (outputs are no longer reproducible)",
        **kw,
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(suppress=True)
    parser = _Parser(prog="edgeqoc", description=__doc__.splitlines()[0], parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("tradeoff", parents=[common], help="AUC against delay and reliability")
    sub.add_parser("compare-schemes", parents=[common], help="solve every scheme per delay spread")
    tdd = sub.add_parser("tdd-sweep", parents=[common], help="compare schemes across TDD patterns")
    tdd.add_argument("--patterns", nargs="+", help="patterns such as UDUUD UUDUD")
    sub.add_parser("prb", parents=[common], help="PRBs per robot from the link budget")
    alloc = sub.add_parser("allocate", parents=[common], help="one solve for one scheme")
    alloc.add_argument("--scheme", required=True, help=f"one of {', '.join(SCHEMES)} or 1-4")
    alloc.add_argument("--table", help="QoC table file from build-table (skips simulation)")
    alloc.add_argument("--lp", action="store_true", help="also write the model in LP format")
    sub.add_parser("build-table", parents=[common], help="simulate and write the QoC table")
    return parser


def run(args: argparse.Namespace):
    cfg = load_config(args.config, args.profile, args.seed, args.runs, args.out)
    if args.command == "tradeoff":
        return cmd_tradeoff(cfg)
    if args.command == "compare-schemes":
        return cmd_compare_schemes(cfg, timings=args.timings)
    if args.command == "tdd-sweep":
        if args.patterns is not None and len(args.patterns) < 1:
            raise InvalidConfigError("--patterns needs at least one pattern")
        return cmd_tdd_sweep(cfg, args.patterns, timings=args.timings)
    if args.command == "prb":
        return cmd_prb(cfg)
    if args.command == "allocate":
        return cmd_allocate(cfg, scheme_name(args.scheme), args.table, args.lp, args.timings)
    return cmd_build_table(cfg)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        outcome = run(args)
    except InvalidConfigError as exc:
        print(f"edgeqoc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"edgeqoc: infeasible ({exc.constraint}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationError as exc:
        print(f"edgeqoc: simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"edgeqoc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # keep the exit-code contract for unexpected failures
        print(f"edgeqoc: simulation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    for path in outcome.paths:
        print(path)
    for message in outcome.messages:
        print(message, file=sys.stderr)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
