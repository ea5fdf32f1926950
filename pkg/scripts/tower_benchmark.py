#!/usr/bin/env python3
"""Coverage and runtime of the doubling-map tower (n0 = 4) across truncation depths and caps.

Prints one row per configuration; use it to see how far the exact construction
gets before the component count reaches the cap.
"""

import argparse
import time
from fractions import Fraction

from noacim import rokhlin
from noacim.maps import NAMED_MAPS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--map", default="doubling", choices=sorted(NAMED_MAPS))
    ap.add_argument("--n0", type=int, default=4)
    ap.add_argument("--depths", type=int, nargs="+", default=[8, 12, 16, 20])
    ap.add_argument("--caps", type=int, nargs="+", default=[100_000, 200_000])
    args = ap.parse_args()
    f = NAMED_MAPS[args.map]()
    eps0 = Fraction(1, 10)
    print(f"{'T':>3} {'cap':>8} {'T_eff':>5} {'j0':>3} {'coverage':>9} {'m(U)':>8} {'disjoint':>8} {'sec':>6}")
    for T in args.depths:
        for cap in args.caps:
            cfg = rokhlin.TowerConfig(n0=args.n0, eps0=eps0, T=max(T, args.n0), cap=cap, adaptive_depth=True)
            t0 = time.perf_counter()
            try:
                tw = rokhlin.build_tower(f, args.n0, 1, eps0, cfg.T, config=cfg)
            except rokhlin.ResourceCapError as exc:
                print(f"{T:>3} {cap:>8}  cap: {exc}")
                continue
            sec = time.perf_counter() - t0
            print(f"{T:>3} {cap:>8} {tw.T:>5} {tw.j0:>3} {float(tw.coverage):>9.4f} {float(tw.U.measure()):>8.4f} "
                  f"{str(tw.disjoint):>8} {sec:>6.1f}")


if __name__ == "__main__":
    main()
