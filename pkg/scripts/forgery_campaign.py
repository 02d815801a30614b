"""Randomized network-adversary runs against an update that is never honestly delivered."""
import argparse
import json
import sys
import time

from casu.experiments import forgery_campaign


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bin-size", type=int, default=16)
    args = ap.parse_args()
    t0 = time.perf_counter()
    r = forgery_campaign(args.runs, args.seed, args.bin_size)
    print(json.dumps({"runs": r.runs, "target_version": r.target_version, "forgeries": r.forgeries,
                      "forged_installs": r.forged_installs,
                      "final_confirmed_versions": dict(sorted(r.confirmed_histogram.items())),
                      "failing_seeds": r.failing_seeds[:20],
                      "seconds": round(time.perf_counter() - t0, 1)}, indent=2))
    return 0 if r.forgeries == 0 and r.forged_installs == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
