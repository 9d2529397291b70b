"""FDR and power of RG-PT as a growing fraction of prior preferences is reversed.

Usage: python3 scripts/ablation_priors.py [--fractions 0,0.25,0.5,0.75,1]
       [--trials 500] [--csv priors.csv]
"""

import argparse

from rgpt.simulate import standard_battery, sweep_corruption, sweep_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fractions", default="0,0.25,0.5,0.75,1")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--depth", default=None, help="graph levels (default: automatic)")
    ap.add_argument("--csv")
    args = ap.parse_args()

    fractions = [float(f) for f in args.fractions.split(",")]
    sc = standard_battery(seed=args.seed)["structured_prior"]
    opts = {}
    if args.depth:
        opts["depth"] = args.depth if args.depth == "max" else int(args.depth)
    reports = sweep_corruption(sc, fractions, args.trials, args.jobs, **opts)
    table = sweep_csv(reports, "corruption", fractions)
    print(table, end="")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(table)


if __name__ == "__main__":
    main()
