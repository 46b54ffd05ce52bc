"""Pair counts and total demand of a seville-like instance at each demand threshold.

Usage: python3 scripts/demand_ladder.py [--seed 2] [--solve]
With --solve, each filtered instance is also solved directly under a time limit.
"""
import argparse
import logging

from indnet.bb import Limits
from indnet.generator import DEMAND_LADDER, generate_synthetic
from indnet.instance import filter_by_demand
from indnet.methods import solve_direct
from indnet.report import RunRecord, format_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--solve", action="store_true")
    ap.add_argument("--time-limit", type=float, default=60.0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    inst = generate_synthetic(args.seed, "seville-like")
    print(f"{inst.name}: {len(inst.nodes)} nodes, {len(inst.edges)} edges, "
          f"{len(inst.centroids)} centroids, {len(inst.demands)} pairs")
    records = []
    for threshold in sorted(DEMAND_LADDER, reverse=True):
        sub = filter_by_demand(inst, threshold)
        total = sum(d.demand for d in sub.demands)
        print(f"min_demand={threshold:>4} pairs={len(sub.demands):>4} demand={total:g}")
        if args.solve:
            res = solve_direct(sub, Limits(time=args.time_limit))
            cov = res.solution.stats if res.solution else None
            records.append(RunRecord(f"{inst.name}-d{threshold}", "direct", res.stats, cov))
    if records:
        print(format_table(records))


if __name__ == "__main__":
    main()
