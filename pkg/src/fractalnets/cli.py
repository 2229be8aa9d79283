"""Command-line entry point: ``fractalnets {gen,build-verify,probe,sweep,regions}``."""
from __future__ import annotations

import argparse
import sys
import traceback

from . import experiments as ex
from .network import ShapeMismatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractalnets", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key=value config file (defaults apply without one)")
        p.add_argument("--out", metavar="DIR", default="runs/" + name, help="output directory")
        p.add_argument("--long-run", action="store_true",
                       help="full-scale defaults (n=5, 50k/5k samples, 10^6 steps, large grids)")
        return p

    add("gen", "sample train/test datasets")
    p = add("build-verify", "compile a classifier and check it against the membership oracle")
    p.add_argument("--net", metavar="PATH", help="verify this net file instead of compiling one")
    add("probe", "gradient probe of PaperUniform-initialized nets on the 1-D Cantor distribution")
    p = add("sweep", "train every depth x width x lr x seed cell")
    p.add_argument("--jobs", type=int, default=None, metavar="N",
                   help="worker processes (default: available CPUs)")
    p = add("regions", "count linear regions and sign changes of a 1-D net")
    p.add_argument("--net", metavar="PATH", help="net file (default: compile the exact classifier)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ex.load_config(args.config, args.long_run)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ex.EXIT_CONFIG
    except ex.CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ex.EXIT_CONFIG
    try:
        if args.command == "gen":
            return ex.cmd_gen(cfg, args.out)
        if args.command == "build-verify":
            return ex.cmd_build_verify(cfg, args.out, args.net)
        if args.command == "probe":
            return ex.cmd_probe(cfg, args.out)
        if args.command == "sweep":
            jobs = args.jobs if args.jobs is not None else ex.default_jobs()
            if jobs < 1:
                print("config error: --jobs must be at least 1", file=sys.stderr)
                return ex.EXIT_CONFIG
            return ex.cmd_sweep(cfg, args.out, jobs)
        if args.command == "regions":
            return ex.cmd_regions(cfg, args.out, args.net)
    except ex.CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ex.EXIT_CONFIG
    except (OSError, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return ex.EXIT_INTERNAL
    return ex.EXIT_INTERNAL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
