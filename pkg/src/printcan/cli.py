"""Command-line entry point: ``printcan run|verify|list-scenarios``."""
import argparse
import sys

from .errors import ParseError, TraceFormatError
from .runner import report_json, run_scenario, verify
from .scenario import find_scenario, list_scenarios, load_scenario, scenario_dir
from .trace import format_trace, read_trace


def _load(name):
    try:
        return load_scenario(find_scenario(name))
    except FileNotFoundError as exc:
        raise SystemExit(f"printcan: {exc}")
    except ParseError as exc:
        raise SystemExit(f"printcan: {name}: {exc}")


def cmd_run(args):
    spec = _load(args.scenario)
    trace, report = run_scenario(spec, seed=args.seed)
    if args.trace:
        with open(args.trace, "w", newline="\n") as fh:
            fh.write(format_trace(trace))
    if args.report:
        with open(args.report, "w", newline="\n") as fh:
            fh.write(report_json(report))
    for v in report["verdicts"]:
        print(f"{'PASS' if v['passed'] else 'FAIL'}  {v['assertion']}")
    for fault in report["faults"]:
        print(f"fault: {fault}")
    hit = [c for c, flag in sorted(report["compromised"].items()) if flag]
    print(f"{spec.name}: {len(trace)} frames, compromised: {', '.join(hit) or 'none'}")
    return 0 if report["passed"] else 1


def cmd_verify(args):
    spec = _load(args.scenario)
    try:
        trace = read_trace(args.trace)
    except TraceFormatError as exc:
        print(f"printcan: {args.trace}: {exc}", file=sys.stderr)
        return 2
    ok = True
    for assertion, verdict in verify(trace, spec.assertions):
        label = {True: "PASS", False: "FAIL", None: "SKIP"}[verdict]
        print(f"{label}  {assertion.text}")
        ok = ok and verdict is not False
    return 0 if ok else 1


def cmd_list(args):
    directory = args.dir or scenario_dir()
    for name in list_scenarios(directory):
        print(name)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="printcan", description="Simulated CAN printer attack scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and check its assertions")
    run.add_argument("scenario", help="scenario file, or a bundled scenario name")
    run.add_argument("--trace", metavar="PATH", help="write a candump-format trace")
    run.add_argument("--report", metavar="PATH", help="write the JSON impact report")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="re-check trace-count assertions against a stored trace")
    ver.add_argument("trace")
    ver.add_argument("scenario")
    ver.set_defaults(func=cmd_verify)

    ls = sub.add_parser("list-scenarios", help="list the scenario corpus")
    ls.add_argument("--dir", default=None, help="scenario directory (default: $PRINTCAN_SCENARIO_DIR or bundled)")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
