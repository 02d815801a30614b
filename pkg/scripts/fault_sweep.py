"""Reset the device before each write of the install routine and check recovery."""
import argparse
import sys

from casu.experiments import fault_sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bin-size", type=int, default=250)
    args = ap.parse_args()
    report = fault_sweep(args.seed, args.bin_size)
    print("write_index,outcome,timeouts,final_state_matches")
    for p in report.points:
        print(f"{p.write_index},{p.outcome},{p.retries},{int(p.matches)}")
    print(f"# {report.passed}/{report.install_writes} injection points recovered", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
