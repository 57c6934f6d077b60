#!/usr/bin/env python3
"""Sweep the kappa grid and print the K * (risk difference) scaling table.

The product K * delta behaves like kappa^{1 - p/2} as kappa -> 0: it
vanishes for p = 1, approaches a constant for p = 2, and diverges for
p >= 3.  The last column reports the halving ratio, whose limit is
2^{p/2 - 1}.

Example:

    python3 scripts/blyth_scaling_sweep.py --m 2 --level 0.95 \
        --kappa-start 0.4 --halvings 6
"""

import argparse

from ntglab.risk import blyth_scaling, default_c


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=2, help="scale degrees of freedom")
    ap.add_argument("--level", type=float, default=0.95)
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--kappa-start", type=float, default=0.4)
    ap.add_argument("--halvings", type=int, default=6)
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2, 3])
    args = ap.parse_args()

    grid = [args.kappa_start / 2 ** i for i in range(args.halvings)]
    for p in args.dims:
        c = default_c(p, args.m, args.level)
        rows = blyth_scaling(p, args.m, c, args.eps, grid)
        target = 2.0 ** (0.5 * p - 1.0)
        print(f"\np = {p}, m = {args.m}, c = {c:.6g}  "
              f"(limit ratio 2^(p/2-1) = {target:.4f})")
        print(f"{'kappa':>10} {'K':>14} {'delta':>14} {'K*delta':>14} {'ratio':>8}")
        prev = None
        for kap, k_const, delta, prod in rows:
            ratio = "" if prev is None else f"{prod / prev:8.4f}"
            print(f"{kap:10.5f} {k_const:14.6g} {delta:14.6g} "
                  f"{prod:14.6g} {ratio:>8}")
            prev = prod


if __name__ == "__main__":
    main()
