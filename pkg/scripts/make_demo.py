"""Write a small demo problem (manifest, risk CSVs, priors) for the CLI.

Usage: python3 scripts/make_demo.py OUTDIR [--seed 0] [--n-samples 500]
"""

import argparse

import numpy as np

from rgpt.io import write_demo_inputs
from rgpt.risk import RiskTable
from rgpt.simulate import gen_synthetic, standard_battery


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-samples", type=int, default=500)
    args = ap.parse_args()

    sc = standard_battery(n_samples=args.n_samples, seed=args.seed)["structured_prior"]
    raw = gen_synthetic(sc.spec, np.random.default_rng(args.seed))
    labels = tuple(f"prompt_{i:02d}" for i in range(raw.n_hyperparams))
    table = RiskTable(raw.values, labels, ("error", "length"))
    path = write_demo_inputs(args.outdir, table, sc.problem.alphas, sc.prior)
    print(path)


if __name__ == "__main__":
    main()
