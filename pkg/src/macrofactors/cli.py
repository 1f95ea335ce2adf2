"""Command-line entry point: ``macrofactors <stage> --config cfg.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as cfgmod
from .errors import InputError, MacroFactorError, NumericalError, ValidationError
from .pipeline import STAGES, run_pipeline

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

EPILOG = f"""\
config defaults (YAML):
{cfgmod.__doc__.split("Defaults::", 1)[1].rstrip()}

exit codes: 0 success, 2 validation error, 3 numerical/estimation error, 4 I/O error
"""


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline config file (YAML)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    common.add_argument("--k", type=_int_list, default=None, help="factor counts to fit, e.g. 1,2,3")
    common.add_argument("--record-timings", action="store_true",
                        help="store per-stage wall-clock timings in the manifest (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog="macrofactors",
        description="Macro panel, dynamic factor model and asset-pricing pipeline.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage only",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub.add_parser("run", parents=[common], help="run every stage in order",
                   epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub.add_parser("validate", parents=[common], help="check the config and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = cfgmod.validate_config(args.config).with_overrides(seed=args.seed, out=args.out, ks=args.k)
        if args.command == "validate":
            print(f"config ok: {cfg.digest()}")
            return EXIT_OK
        stages = STAGES if args.command == "run" else (args.command,)
        man = run_pipeline(cfg, stages, record_timings=args.record_timings)
    except ValidationError as exc:
        print("invalid config:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MacroFactorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{', '.join(man.stages)} done -> {cfg.out_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
