"""Compression counts per phase for a range of image sizes, plus a least-squares fit."""
import argparse
import statistics
import sys

from casu.scaling import measure_scaling, to_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="302,474,786")
    ap.add_argument("--out", help="also write the CSV here")
    args = ap.parse_args()
    rows = measure_scaling(int(s) for s in args.sizes.split(","))
    text = to_csv(rows)
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    x = [r.size for r in rows]
    y = [r.auth_compressions for r in rows]
    if len(rows) >= 2:
        slope, icept = statistics.linear_regression(x, y)
        r2 = statistics.correlation(x, y) ** 2
        print(f"# auth ~ {slope:.5f} * size + {icept:.2f}   R^2 = {r2:.5f}", file=sys.stderr)
    print(f"# install counts: {sorted({r.install_compressions for r in rows})}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
