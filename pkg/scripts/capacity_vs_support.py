"""Capacity (bits) against support size over a log-spaced amplitude sweep.

Writes the sweep CSV and prints the transition rows and the fitted slope of
capacity_bits against log2(N).

    python scripts/capacity_vs_support.py --amin 1 --amax 60 --count 25 --out sweep.csv
"""

import argparse
import math

from poisson_capacity.sweep import run_sweep, support_nondecreasing, transition_rows, trend_slope, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amin", type=float, default=1.0)
    ap.add_argument("--amax", type=float, default=60.0)
    ap.add_argument("--count", type=int, default=25)
    ap.add_argument("--dark-current", type=float, default=0.0)
    ap.add_argument("--out", default="capacity_vs_support.csv")
    args = ap.parse_args()

    rows = run_sweep(args.amin, args.amax, args.count, args.dark_current)
    write_csv(args.out, rows)
    print(f"{'A':>10} {'N':>3} {'C bits':>10} {'log2 N':>8}")
    for r in rows:
        print(f"{r.amplitude:10.4f} {r.support_size:3d} {r.capacity_bits:10.6f} {math.log2(r.support_size):8.4f}")
    print(f"\nnondecreasing N: {support_nondecreasing(rows)}")
    print("transition rows:", ", ".join(f"A={r.amplitude:.3f}/N={r.support_size}" for r in transition_rows(rows)))
    print(f"slope of capacity_bits vs log2 N: {trend_slope(rows):.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
