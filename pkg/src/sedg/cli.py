"""Command-line entry point.

    sedg run --config scenario.json [--seed N] [--out events.jsonl] [--format json|text]
    sedg explore --config scenario.json [--depth N]
    sedg demo --protocol v1|v2|v3

Exit codes: 0 success / no violations, 1 violations found, 2 config error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sedg",
        description="Run and adversarially explore the escrowed data-exchange protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario under the default schedule")
    run.add_argument("--config", required=True, help="path to a scenario JSON file")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="write the event log (JSON lines) here")
    run.add_argument("--format", choices=("json", "text"), default="text")

    explore = sub.add_parser("explore", help="exhaustively explore schedules")
    explore.add_argument("--config", required=True, help="path to a scenario JSON file")
    explore.add_argument("--depth", type=int, default=12, help="scheduling-choice bound")

    demo = sub.add_parser("demo", help="narrated happy-path walkthrough")
    demo.add_argument("--protocol", choices=("v1", "v2", "v3"), required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = harness.config_from_file(args.config)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            report = harness.run_scenario(config, log_path=args.out)
            sys.stdout.write(harness.emit_report(report, args.format).decode("utf-8"))
            if args.format == "json":
                sys.stdout.write("\n")
            return 0

        if args.command == "explore":
            config = harness.config_from_file(args.config)
            result = harness.explore(config, depth=args.depth)
            print(
                f"explored {result.schedules_explored} schedules "
                f"(max depth {result.max_depth}): "
                f"{len(result.violations)} violation(s)"
            )
            for violation in result.violations:
                print(f"  {violation.prop}: {violation.detail}")
                print(f"    schedule: {' | '.join(violation.schedule)}")
            return 1 if result.violations else 0

        if args.command == "demo":
            harness.demo(args.protocol)
            return 0
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except harness.DepthExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
