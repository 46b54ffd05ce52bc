"""Branch-and-Benders-cut over percentage x selection type, compared with direct solves.

Usage: python3 scripts/benders_grid.py [--seeds 1-25] [--out grid.csv]
Prints one table row per run and, at the end, the runs whose objective disagrees.
"""
import argparse
import logging

from indnet.benders import PartialConfig, solve_benders
from indnet.generator import generate_synthetic
from indnet.methods import solve_direct
from indnet.report import RunRecord, format_csv, format_table


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=seed_range, default=seed_range("1-25"))
    ap.add_argument("--size", default="tiny")
    ap.add_argument("--percentages", type=float, nargs="+", default=[0, 10, 50])
    ap.add_argument("--lam", type=float, default=0.5)
    ap.add_argument("--out", help="also write the records as CSV")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(message)s")

    records, mismatches = [], []
    for seed in args.seeds:
        inst = generate_synthetic(seed, args.size)
        direct = solve_direct(inst)
        records.append(RunRecord(inst.name, "direct", direct.stats,
                                 direct.solution.stats if direct.solution else None))
        for pct in args.percentages:
            for kind in (1, 2, 3):
                res = solve_benders(inst, PartialConfig(pct, kind), lam=args.lam)
                records.append(RunRecord(inst.name, "benders", res.stats,
                                         res.solution.stats if res.solution else None,
                                         percentage=pct, selection_type=kind, lam=args.lam))
                if res.objective != direct.objective:
                    mismatches.append((inst.name, pct, kind, res.objective, direct.objective))
    print(format_table(records))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(format_csv(records))
    print(f"{len(records)} runs, {len(mismatches)} objective mismatches")
    for m in mismatches:
        print("mismatch", *m)


if __name__ == "__main__":
    main()
