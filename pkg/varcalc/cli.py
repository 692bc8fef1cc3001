"""
Command line: `varcalc run`, `varcalc check`, `varcalc list`.

Exit codes: 0 success, 1 solver failure, 2 spec or parse error.
"""
from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys

from pydantic import ValidationError

from varcalc.config import get_settings
from varcalc.exceptions import (
    ChartError,
    DimensionError,
    InvalidArgumentError,
    SolverError,
    SpecError,
    StructureError,
)
from varcalc.services.catalog import CatalogService
from varcalc.services.invariants import CheckService
from varcalc.services.runner import RunService
from varcalc.services.specfile import load_spec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_SPEC = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varcalc", description="Variational solvers on algebroids and groupoids")
    parser.add_argument("--log-level", default=None, help="logging level (default from VARCALC_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a spec file or a catalog problem")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("spec", nargs="?", help="path to a spec file")
    source.add_argument("--catalog", metavar="NAME", help="name of a built-in problem")
    run.add_argument("--out", metavar="PATH", help="CSV output (default <name>.csv)")
    run.add_argument("--dt", type=float, help="integration step")
    run.add_argument("--t1", type=float, help="final time")
    run.add_argument("--steps", type=int, help="number of discrete steps")

    check = commands.add_parser("check", help="run the invariant suite")
    check.add_argument("--only", metavar="PATTERN", help="glob or substring filter on invariant names")

    commands.add_parser("list", help="list catalog problems")
    return parser


def _run(args: argparse.Namespace) -> int:
    spec = CatalogService.get(args.catalog) if args.catalog else load_spec(args.spec)
    spec = RunService.apply_overrides(spec, dt=args.dt, t1=args.t1, steps=args.steps)
    result = RunService.run(spec)
    out = Path(args.out) if args.out else Path(f"{spec.name or Path(args.spec).stem}.csv")
    RunService.write_csv(result.trajectory, out)
    logger.info(f"wrote {len(result.trajectory)} samples to {out}")
    print(result.summary.line())
    return EXIT_OK


def _check(args: argparse.Namespace) -> int:
    report = CheckService.run(only=args.only)
    for r in report.results:
        value = "-" if r.value is None else f"{r.value:.3e}"
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<40} {value:>10}  {r.detail}".rstrip())
    print(f"{report.passed} passed, {report.failed} failed")
    return EXIT_OK if report.ok else EXIT_SOLVER


def _list(args: argparse.Namespace) -> int:
    for entry in CatalogService.entries():
        print(f"{entry.name:<28} {entry.kind:<20} {entry.description}")
    return EXIT_OK


COMMANDS = {"run": _run, "check": _check, "list": _list}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=(args.log_level or get_settings().log_level).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SpecError, InvalidArgumentError, DimensionError, ValidationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except (SolverError, ChartError, StructureError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"solver failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
