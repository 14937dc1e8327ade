"""Run the de Rham / Cech-Alexander comparison over a grid of flat lifts.

    python3 scripts/comparison_sweep.py --primes 2 3 --precisions 1 2 --dims 1 2 --d 8
"""
from __future__ import annotations

import argparse
import json

from crystalcoh.compare import ExperimentSpec, compare_derham_ca
from crystalcoh.envelope import SchemePresentation

NAMES = ["x", "y", "z"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--primes", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--precisions", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--level", type=int, default=2)
    ap.add_argument("--json", help="also write all reports to this file")
    args = ap.parse_args()
    docs = []
    for n in args.dims:
        for p in args.primes:
            for e in args.precisions:
                pres = SchemePresentation.from_strings(p, 1, NAMES[:n], [])
                rep = compare_derham_ca(ExperimentSpec(pres, e, args.d, args.level))
                tab = rep.tables[f"d={args.d}"]["de_rham"]
                print(f"A^{n} p={p} e={e} d={args.d}: {rep.status:12s} {rep.timing:6.1f} s  "
                      f"H^0 length {sum(sum(v) for v in tab.get('0', {}).values())}, "
                      f"H^1 length {sum(sum(v) for v in tab.get('1', {}).values())}")
                docs.append(rep.to_document(include_timing=True))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(docs, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
