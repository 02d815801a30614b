"""``casu-sim``: run scenarios, check the monitor, measure hash work."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checker import check_properties, default_er_samples, miniature_config
from .layout import LayoutError, Region, default_layout, load_layout
from .monitor import MonitorConfig
from .scaling import measure_scaling, to_csv
from .scenario import ScenarioError, dumps_report, run_scenario


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        report = run_scenario(args.scenario, seed=args.seed)
    except (ScenarioError, LayoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = dumps_report(report)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    for c in report["expectations"]:
        if not c["pass"]:
            print(f"FAIL {c['expectation']} (actual: {c['actual']})", file=sys.stderr)
    return 0 if report["pass"] else 1


def _cmd_check_hw(args: argparse.Namespace) -> int:
    try:
        layout = load_layout(args.layout) if args.layout else None
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if layout is None and args.full_enumeration:
        # no real layout fits an exhaustive sweep; use the shrunken map
        cfg, samples = miniature_config()
        extra: tuple[Region, ...] = (Region(8, 15),)
    else:
        layout = layout or default_layout()
        cfg = MonitorConfig.from_layout(layout)
        extra = (layout.dmem, layout.pmem, layout.atr)
        app = layout.app_area
        samples = ([app, Region(app.min, app.min), Region(app.max, app.max)]
                   if args.full_enumeration else default_er_samples(app))
    try:
        report = check_properties(cfg, samples, extra, full_enumeration=args.full_enumeration,
                                  raise_on_failure=False)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = report.dumps() + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if report.ok else 1


def _cmd_scaling(args: argparse.Namespace) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        rows = measure_scaling(sizes)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="casu-sim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario file and emit a JSON report")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--report", help="write the report here instead of stdout")
    run.set_defaults(func=_cmd_run)

    hw = sub.add_parser("check-hw", help="enumerate monitor inputs against the safety properties")
    hw.add_argument("--layout", help="layout JSON (default memory map if omitted)")
    hw.add_argument("--full-enumeration", action="store_true",
                    help="every address instead of probe classes (toy layouts only)")
    hw.add_argument("--report", help="write the report here instead of stdout")
    hw.set_defaults(func=_cmd_check_hw)

    sc = sub.add_parser("measure-scaling", help="SHA-256 compressions per phase, as CSV")
    sc.add_argument("--sizes", default="302,474,786", help="comma-separated image sizes in bytes")
    sc.set_defaults(func=_cmd_scaling)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
