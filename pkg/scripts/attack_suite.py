"""Run every scenario in scenarios/ and print one verdict line each."""
import argparse
import sys
from pathlib import Path

from casu.scenario import run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", default=Path(__file__).resolve().parent.parent / "scenarios", type=Path)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    failed = 0
    for path in sorted(args.dir.glob("*.json")):
        report = run_scenario(path, seed=args.seed)
        outcomes = ",".join(s["outcome"] for s in report["steps"])
        verdict = "ok  " if report["pass"] else "FAIL"
        failed += not report["pass"]
        print(f"{verdict} {path.stem:<24} {outcomes}")
    print(f"{failed} failing scenario(s)")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
