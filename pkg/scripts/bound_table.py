"""Solved support size next to its closed-form lower and upper bounds.

Also reports where the interior atoms fall inside the location interval.

    python scripts/bound_table.py --dark-current 0.5
"""

import argparse

import numpy as np

from poisson_capacity import ChannelParams, interior_location_bounds, solve, support_lower_bound, support_upper_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amin", type=float, default=0.1)
    ap.add_argument("--amax", type=float, default=60.0)
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--dark-current", type=float, default=0.0)
    args = ap.parse_args()

    print(f"{'A':>9} {'C nats':>9} {'lower':>5} {'N':>3} {'upper':>6}  interior atoms / interval")
    for a in np.geomspace(args.amin, args.amax, args.count):
        p = ChannelParams(float(a), args.dark_current)
        s = solve(p)
        loc = interior_location_bounds(p)
        inner = ", ".join(f"{x:.3f}" for x in s.input.points[1:-1])
        where = f"[{inner}] in [{loc.lambert[0]:.3f}, {loc.lambert[1]:.3f}]" if loc else "-"
        flag = "" if s.converged else "  (not converged)"
        print(f"{a:9.4f} {s.capacity_nats:9.6f} {support_lower_bound(p, s.capacity_nats):5d} "
              f"{s.support_size:3d} {support_upper_bound(p)!s:>6}  {where}{flag}")


if __name__ == "__main__":
    main()
