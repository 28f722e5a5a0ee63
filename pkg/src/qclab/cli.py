"""Command line surface.

Subcommands:
    run          --scenario <file> --out <dir>
    sweep-lambda --scenario <file> --lambdas <comma list> --out <dir>
    demo crossing --mode coherent|mixture --out <dir>
    kvn          --scenario <file> --out <dir>
    validate     [--fast] [--out <dir>]

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .runner import demo_scenario, run, run_kvn, sweep_lambda
from .scenario import ConfigError, load_scenario, scenario_from_dict
from .solver import NumericalFailure
from .validation import run_validation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qclab",
        description="Numerical laboratory for the quantum-classical transition")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep-lambda",
                             help="run a scenario across interpolation weights")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--lambdas", required=True,
                         help="comma-separated list, each in [0,1]")
    p_sweep.add_argument("--out", required=True)

    p_demo = sub.add_parser("demo", help="built-in demonstration scenarios")
    demo_sub = p_demo.add_subparsers(dest="demo_name", required=True)
    p_cross = demo_sub.add_parser("crossing",
                                  help="two packets, coherent versus sheet mixture")
    p_cross.add_argument("--mode", required=True, choices=["coherent", "mixture"])
    p_cross.add_argument("--out", required=True)

    p_kvn = sub.add_parser("kvn", help="phase-space amplitude pipeline")
    p_kvn.add_argument("--scenario", required=True)
    p_kvn.add_argument("--out", required=True)

    p_val = sub.add_parser("validate", help="run the acceptance suite")
    p_val.add_argument("--fast", action="store_true",
                       help="reduced-scale smoke version")
    p_val.add_argument("--out", default="qclab_validate")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            run(load_scenario(args.scenario), args.out)
        elif args.command == "sweep-lambda":
            try:
                lambdas = [float(v) for v in args.lambdas.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad --lambdas list: {exc}") from exc
            sweep_lambda(load_scenario(args.scenario), lambdas, args.out)
        elif args.command == "demo":
            scenario = scenario_from_dict(demo_scenario(args.mode))
            run(scenario, args.out)
        elif args.command == "kvn":
            run_kvn(load_scenario(args.scenario), args.out)
        elif args.command == "validate":
            results = run_validation(args.out, fast=args.fast)
            if not all(r.passed for r in results):
                return 1
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
