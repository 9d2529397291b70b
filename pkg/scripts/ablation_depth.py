"""FDR and power of RG-PT as the number of graph levels varies.

Usage: python3 scripts/ablation_depth.py [--depths 1,3,5,10,max] [--trials 500]
       [--scenario structured_prior] [--csv depth.csv]
"""

import argparse
import warnings

from rgpt.simulate import standard_battery, sweep_csv, sweep_depth


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depths", default="1,3,5,10,max")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--scenario", default="structured_prior")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv")
    args = ap.parse_args()

    depths = [d if d == "max" else int(d) for d in args.depths.split(",")]
    sc = standard_battery(seed=args.seed)[args.scenario]
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="depth .* clamped")
        reports = sweep_depth(sc, depths, args.trials, args.jobs)
    table = sweep_csv(reports, "depth", depths)
    print(table, end="")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(table)


if __name__ == "__main__":
    main()
