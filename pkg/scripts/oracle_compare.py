#!/usr/bin/env python3
"""Before/after averaged densities for the pipeline's perturbation, written as CSV.

    python scripts/oracle_compare.py --eps 1/2 --grid 4096 --out densities/
"""

import argparse
from fractions import Fraction
from pathlib import Path

from noacim import escape, pipeline
from noacim.maps import NAMED_MAPS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--map", default="doubling", choices=sorted(NAMED_MAPS))
    ap.add_argument("--eps", default="1/10")
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--grid", type=int, default=2**12)
    ap.add_argument("--steps", type=int, default=64)
    ap.add_argument("--out", default="oracle-out")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    f = NAMED_MAPS[args.map]()
    report = pipeline.run(f, config=pipeline.PipelineConfig(eps=Fraction(args.eps), k=args.k))
    for name, m in (("f", f), ("g", report.g)):
        avg = escape.kb_average(m, args.steps, args.grid)
        escape.write_density_csv(avg, out / f"density_{name}.csv")
        escape.write_profile_csv(avg, out / f"profile_{name}.csv")
        print(f"{name}: concentration(q=1/2) = {escape.concentration_statistic(avg, 0.5):.6f}")
    grid = escape.grid_image_measure(report.g, report.K, report.certificate.N, args.grid)
    print(f"m(g^k K): exact {float(report.verdict.m_image):.3e}, grid {grid:.3e}")


if __name__ == "__main__":
    main()
