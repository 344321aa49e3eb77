"""Command-line experiment runner.

    fracstick run <config.ini>        run an experiment pipeline
    fracstick validate <config.ini>   list hypothesis violations, if any
    fracstick crossval --seed <int>   graph-vs-PV curvature cross-check

Exit codes: 0 success, 2 solver non-convergence / failed certification,
3 invalid configuration.  FRACSTICK_WORKERS overrides the worker count.
"""

import argparse
import sys

from .errors import FracstickError
from .experiments import crossval, load_config, run_experiment, validate
from .params import FractionalParams


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracstick", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the INI experiment config")
    p_run.add_argument("--workers", type=int, default=None, help="cap worker count")

    p_val = sub.add_parser("validate", help="validate an experiment config")
    p_val.add_argument("config", help="path to the INI experiment config")

    p_cv = sub.add_parser("crossval", help="curvature oracle cross-validation")
    p_cv.add_argument("--seed", type=int, default=0)
    p_cv.add_argument("--out", default="fracstick-out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            config = load_config(args.config)
            problems = validate(config)
            if problems:
                for p in problems:
                    print(f"violation: {p}")
                return 3
            print("config ok")
            return 0
        if args.command == "run":
            config = load_config(args.config)
            if args.workers is not None:
                import dataclasses

                config.solver = dataclasses.replace(config.solver, workers=args.workers)
            return run_experiment(config)
        if args.command == "crossval":
            return crossval(args.seed, args.out)
    except FracstickError as exc:
        print(f"config error: {exc}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
