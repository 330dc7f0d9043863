"""``planx`` command line: run seeded baseline/transformed experiments."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from planx.errors import ConfigError, PlanxError
from planx.experiment import ExperimentConfig, run_experiment, write_report

EXIT_OK, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # bad arguments are configuration errors, not argparse's default exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="planx", description="Project plans, transform their task trees, compare costs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log applied transformations")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a baseline vs transformed experiment")
    run.add_argument("--plan", required=True, help=".plan file with one or more def-plan forms")
    run.add_argument("--scenario", required=True, help="scenario JSON")
    run.add_argument("--top-level", help="plan to run (default: last def-plan in the file)")
    run.add_argument("--trials", type=int, default=200)
    run.add_argument("--seed", type=int, default=0, help="base seed; trial i uses seed + i")
    run.add_argument("--transforms", default="", help="comma-separated names, highest priority first")
    run.add_argument("--out", help="JSON report path")
    run.add_argument("--csv", help="per-trial CSV path")
    run.add_argument("--hist", help="histogram JSON path (default: next to --out)")
    run.add_argument("--bins", type=int, default=20)
    run.add_argument("--dump-tree", help="write trial 0's transformed task tree as JSON")
    run.add_argument("--dump-trace", help="write trial 0's transformed trace as JSON lines")
    run.add_argument("--rules", help="extra query rules file")
    run.add_argument("--unpaired", action="store_true", help="give transformed runs their own seeds")
    run.add_argument("--failure-free", action="store_true", help="zero all failure probabilities")
    return parser


def _hist_path(args) -> str | None:
    if args.hist:
        return args.hist
    if args.out:
        out = Path(args.out)
        return str(out.with_name(out.stem + ".hist.json"))
    return None


def _run(args) -> None:
    if args.bins < 1:
        raise ConfigError("--bins must be at least 1")
    cfg = ExperimentConfig(
        plan_file=args.plan, scenario_file=args.scenario, top_level=args.top_level,
        trials=args.trials, base_seed=args.seed,
        transforms=[t.strip() for t in args.transforms.split(",") if t.strip()],
        paired=not args.unpaired, failure_free=args.failure_free, rules_file=args.rules,
    )
    report = run_experiment(cfg)
    write_report(report, args.out, args.csv, _hist_path(args), args.bins)
    try:
        if args.dump_tree:
            Path(args.dump_tree).write_text(json.dumps(report.first_tree.to_dict(), indent=2) + "\n")
        if args.dump_trace:
            Path(args.dump_trace).write_text(report.first_trace.to_jsonl())
    except OSError as e:
        raise ConfigError(f"cannot write dump: {e}") from e
    if not args.out:
        json.dump(report.to_dict()["summary"], sys.stdout, indent=2)
        sys.stdout.write("\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except PlanxError as e:
        print(f"planx: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - anything else is a bug
        logging.getLogger("planx").exception("internal error")
        print(f"planx: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
