"""``lcsfluct <command> [--config FILE] [--seed N] [--reps N] [--out DIR] [--threads N] [--emit csv,json,svg]``"""

import argparse
import json
import os
import sys

from lcsfluct.errors import LcsFluctError
from lcsfluct.harness import COMMANDS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_SELFTEST = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="lcsfluct", description="LCS fluctuation experiments for the sparse long-block model.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--reps", type=int, help="replicates per point (overrides config)")
    p.add_argument("--out", help="output directory (overrides config and $LCSFLUCT_OUTPUT_DIR)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--emit", help="comma-separated subset of csv,json,svg")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = {}
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        if data.get("command", args.command) != args.command:
            raise LcsFluctError(f"config is for {data['command']!r}, not {args.command!r}")
        data["command"] = args.command
        if args.seed is not None:
            data["master_seed"] = args.seed
        if args.reps is not None:
            data["reps"] = args.reps
        if args.out is not None:
            data["output_dir"] = args.out
        if args.emit is not None:
            data["emit"] = [f.strip() for f in args.emit.split(",") if f.strip()]
        data["workers"] = args.threads
        report = run_experiment(ExperimentConfig.from_dict(data))
    except (LcsFluctError, json.JSONDecodeError, TypeError) as exc:
        print(f"lcsfluct: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"lcsfluct: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"lcsfluct: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(report.summary, indent=2, sort_keys=True))
    if report.command == "selftest" and not report.summary.get("all_passed"):
        return EXIT_SELFTEST
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
