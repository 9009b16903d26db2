"""Command line: ``generate``, ``run`` and ``report``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .bench import RunPlan, run_suite, write_report
from .nav import CONTROLLERS
from .scenario import DENSITIES, FlowKind, SuiteSpec, generate_suite

OUT_ENV = "CROWDBENCH_OUT"
EXIT_OK, EXIT_USAGE, EXIT_FAILURES = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="crowdbench", description="Crowd-robot navigation benchmark")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write the 100-scenario standard suite")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("run", help="run scenarios x controllers and write the report")
    r.add_argument("--suite", type=Path, required=True)
    r.add_argument("--controllers", default="baseline,dwa,rvo")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--records", choices=("full", "metrics"), default="metrics")
    r.add_argument("--out", type=Path, default=None, help=f"output directory (default: ${OUT_ENV} or ./crowdbench-out)")
    r.add_argument("--density", default=None, help="comma list of agent counts to keep, e.g. 50")
    r.add_argument("--flow", default=None, help="comma list of flows to keep, e.g. 1D+,2Dx")
    r.add_argument("--crowd", default=None, help="comma list of crowd configuration names to keep")

    rep = sub.add_parser("report", help="rebuild the aggregate report from per-run rows")
    rep.add_argument("--in", dest="in_dir", type=Path, required=True)
    return p


def _split(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def parse_plan(args) -> RunPlan:
    """Validate ``run`` arguments and load the suite into a plan."""
    controllers = _split(args.controllers)
    if not controllers:
        raise UsageError("--controllers must name at least one controller")
    unknown = [c for c in controllers if c not in CONTROLLERS]
    if unknown:
        raise UsageError(f"unknown controller(s): {', '.join(unknown)}")
    if len(set(controllers)) != len(controllers):
        raise UsageError("--controllers lists a controller twice")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if not (args.suite / "manifest.json").exists():
        raise UsageError(f"--suite {args.suite}: no manifest.json")
    suite = SuiteSpec.load(args.suite)
    keep = suite.scenarios
    if args.density:
        try:
            counts = {int(x) for x in _split(args.density)}
        except ValueError:
            raise UsageError("--density takes agent counts") from None
        if not counts <= {d.agents for d in DENSITIES}:
            raise UsageError(f"--density must be among {[d.agents for d in DENSITIES]}")
        keep = [s for s in keep if s.density.agents in counts]
    if args.flow:
        try:
            flows = {FlowKind(x) for x in _split(args.flow)}
        except ValueError as e:
            raise UsageError(str(e)) from None
        keep = [s for s in keep if s.flow in flows]
    if args.crowd:
        names = set(_split(args.crowd))
        keep = [s for s in keep if s.crowd_config.name in names]
    if not keep:
        raise UsageError("filters leave no scenarios to run")
    out = args.out or Path(os.environ.get(OUT_ENV, "crowdbench-out"))
    return RunPlan(SuiteSpec(keep, suite.master_seed), tuple(controllers), out, args.jobs, args.records)


def cli_parse(argv):
    """Parse argv into ``(command, payload)``; raises ``UsageError``."""
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return "run", parse_plan(args)
    return args.command, args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, payload = cli_parse(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if command == "generate":
        suite = generate_suite(payload.seed)
        manifest = suite.save(payload.out)
        print(f"wrote {len(suite)} scenarios and {manifest}")
        return EXIT_OK
    if command == "run":
        code = run_suite(payload)
        print(f"wrote report to {payload.out_dir}")
        return code
    if not (payload.in_dir / "runs.csv").exists():
        print(f"crowdbench report: {payload.in_dir} has no runs.csv", file=sys.stderr)
        return EXIT_USAGE
    write_report(payload.in_dir)
    print(f"rebuilt report in {payload.in_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
