"""Locate the first p-torsion horizontal class of the envelope of (x^2, xy, y^2).

For each truncation d the script reports how many torsion classes the search
finds and in which weights.  This is the data behind the statement that no
torsion exists below weight 4p.

    python3 scripts/bo_torsion_scan.py --primes 2 3 --max-d 14
"""
from __future__ import annotations

import argparse
import time

from crystalcoh.compare import ExperimentSpec, bo_presentation
from crystalcoh.crystal import CrystalData, torsion_horizontal
from crystalcoh.pdpoly import format_element


def scan(p: int, e: int, max_d: int):
    for d in range(4, max_d + 1, 2):
        t0 = time.perf_counter()
        env = ExperimentSpec(bo_presentation(p), e, d).envelope(d)
        taus = torsion_horizontal(CrystalData.constant(env))
        weights = sorted(min(env.ambient.weight(m) for m in t[0].terms) for t in taus)
        yield d, weights, [format_element(t[0]) for t in taus], time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--primes", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--e", type=int, default=2)
    ap.add_argument("--max-d", type=int, default=14)
    args = ap.parse_args()
    for p in args.primes:
        print(f"p = {p}, e = {args.e}")
        for d, weights, taus, dt in scan(p, args.e, args.max_d):
            print(f"  d = {d:2d}: {len(taus)} class(es) in weights {weights}  ({dt:.1f} s)")
            for t in taus:
                print(f"      tau = {t}")


if __name__ == "__main__":
    main()
