"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 missing input.
"""
import argparse
import logging
import sys
from pathlib import Path

from .assembly import DegenerateFieldError
from .basis import BasisMismatchError, IllConditionedBasisError
from .config import ConfigError, RunConfig
from .forward import ForwardSolverError, GeometryError, SingularityError
from .inversion import DivergenceError, InitializationError
from .io import MissingInputError
from .pipeline import STAGES, run_pipeline, run_probes, run_stage, subtract
from .preprocess import InsufficientDataError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISSING = 0, 2, 3, 4

NUMERIC_ERRORS = (
    ForwardSolverError,
    SingularityError,
    DegenerateFieldError,
    IllConditionedBasisError,
    BasisMismatchError,
    InitializationError,
    DivergenceError,
    InsufficientDataError,
)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="run directory (default: output_dir from the config)")
    common.add_argument("--seed", type=int, help="noise and sampling seed")
    common.add_argument("--stage-override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a dotted config key, e.g. inversion.lam=2.0 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="convexcip", description="Multi-frequency convexification for the 3D Helmholtz inverse problem.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common], help="run the %s stage" % name)
    sub.add_parser("pipeline", parents=[common], help="run all stages in order")
    sp = sub.add_parser("subtract", parents=[common], help="difference of two far-field datasets")
    sp.add_argument("minuend", help="dataset file (.json or .bin) or stem")
    sp.add_argument("subtrahend")
    sub.add_parser("probe-theorems", parents=[common], help="numerical probes of the convexity theory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = list(args.stage_override)
        if args.seed is not None:
            overrides.append("seed=%d" % args.seed)
        cfg = RunConfig.load(args.config, overrides)
        out = Path(args.out or cfg["output_dir"])
        if args.command == "pipeline":
            run_pipeline(cfg, out)
        elif args.command == "subtract":
            subtract(args.minuend, args.subtrahend, out)
        elif args.command == "probe-theorems":
            run_probes(cfg, out)
        else:
            run_stage(args.command, cfg, out)
    except (ConfigError, GeometryError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print("missing input: %s" % exc, file=sys.stderr)
        return EXIT_MISSING
    except NUMERIC_ERRORS as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print("invalid input: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
