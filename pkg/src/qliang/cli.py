"""Command-line entry point: ``qliang run | validate | plot | scenarios``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, ConvergenceError, DimensionCapError, FlowRequestError, RegistryError
from .plotting import PlotError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_DIM_CAP = 3


def _cmd_run(args) -> int:
    from .scenario import run_scenario

    try:
        paths = run_scenario(args.config, out_dir=args.out, svg=True if args.svg else None)
    except DimensionCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIM_CAP
    except (ConfigError, FlowRequestError, RegistryError, ConvergenceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .validation import run_validation

    results = run_validation(args.check or None)
    if not results:
        print("error: no checks selected", file=sys.stderr)
        return EXIT_INVALID
    if args.json:
        print(json.dumps([r.as_dict() for r in results], indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:32s} {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if not args.json:
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_plot(args) -> int:
    from .plotting import plot

    try:
        plot(args.csv, args.svg)
    except (PlotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(args.svg)
    return EXIT_OK


def _cmd_scenarios(args) -> int:
    from .scenario import bundled_names, load_bundled

    for name in bundled_names():
        print(f"{name:14s} {load_bundled(name).description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qliang", description="Quantum Liang information flow")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file (or bundled scenario name)")
    run.add_argument("config")
    run.add_argument("-o", "--out", help="output directory (overrides the config)")
    run.add_argument("--svg", action="store_true", help="also write SVG plots")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="run the built-in invariant and golden-number checks")
    val.add_argument("--json", action="store_true", help="machine-readable report")
    val.add_argument("--check", action="append", help="run only the named check (repeatable)")
    val.set_defaults(func=_cmd_validate)

    plot = sub.add_parser("plot", help="plot a flow CSV as SVG")
    plot.add_argument("csv")
    plot.add_argument("svg")
    plot.set_defaults(func=_cmd_plot)

    sc = sub.add_parser("scenarios", help="list bundled scenarios")
    sc.set_defaults(func=_cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
