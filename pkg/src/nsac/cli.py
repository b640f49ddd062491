"""``nsac-sim``: run, sweep, refine and self-check from the command line.

Exit status: 0 success, 1 usage or configuration error, 2 blow-up,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from nsac.config import ConfigError, parse_config
from nsac.grid import ConstructionError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BLOWUP = 2
EXIT_ACCEPTANCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; 2 is reserved for blow-up here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _report_run(result, label: str = "") -> None:
    head = f"{label}: " if label else ""
    status = "BLOW-UP" if result.blew_up else "ok"
    print(f"{head}{status} t={result.final_time:.6g} steps={result.n_steps} "
          f"budget={result.budget:.3e} mass_drift={result.mass_drift:.2e} "
          f"bounds={'ok' if result.bounds_ok else 'VIOLATED'} -> {result.directory}")
    if result.blew_up:
        print(f"{head}{result.message}", file=sys.stderr)


def cmd_run(args) -> int:
    from nsac.drivers import execute

    config = parse_config(args.config)
    if args.plot:
        from dataclasses import replace

        config = replace(config, output=replace(config.output, plot=True))
    result = execute(config, backend=args.backend)
    _report_run(result)
    return EXIT_BLOWUP if result.blew_up else EXIT_OK


def cmd_sweep(args) -> int:
    from nsac.drivers import sweep

    out = sweep(args.config, args.axis, workers=args.workers, backend=args.backend)
    for value, result in zip(out.values, out.results):
        _report_run(result, f"{out.key}={value}")
    return EXIT_BLOWUP if out.any_blow_up else EXIT_OK


def cmd_convergence(args) -> int:
    from nsac.drivers import convergence_study

    config = parse_config(args.config)
    table = convergence_study(config, args.levels, backend=args.backend)
    print(table.format())
    directory = Path(config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    table.write_csv(directory / "convergence.csv")
    print(f"minimum observed order {table.min_order():.3f} -> {directory / 'convergence.csv'}")
    return EXIT_OK


def cmd_check(args) -> int:
    from nsac.acceptance import run_all

    results = run_all(backend=args.backend, report=lambda c: print(c.line(), flush=True))
    failed = [c.number for c in results if not c.passed]
    if failed:
        print(f"{len(failed)} criterion(s) failed: {', '.join(map(str, failed))}")
        return EXIT_ACCEPTANCE
    print(f"all {len(results)} criteria passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsac-sim", description="1-D Navier-Stokes-Allen-Cahn simulator")
    parser.add_argument("--backend", choices=("cython", "python"), default=None,
                        help="kernel implementation (default: compiled if available)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one configuration")
    p.add_argument("config")
    p.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one configuration per value of a parameter")
    p.add_argument("config")
    p.add_argument("--axis", required=True, help="key=v1,v2,... (e.g. theta=0.9,0.95 or seed=1,2,3)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("convergence", help="refinement study on N, 2N, ..., 2^R N")
    p.add_argument("config")
    p.add_argument("--levels", type=int, required=True, metavar="R")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("check", help="run the acceptance suite")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    from nsac.solver_euler import BlowUpError

    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "levels", 1) < 1:
        parser.error("--levels must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, ConstructionError) as exc:
        print(f"nsac-sim: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"nsac-sim: blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
