"""Pilot run fixing the rate constants in ``simharness.LAMBDA_SCALE``.

For N = 1024 and s = 1 the oracle fit (true beta known) is computed on a log
grid of lambda; the grid point with the smallest mean integrated squared error
defines lambda*, and each rule's constant is lambda* / rate(1024).  Pilot seeds
are disjoint from the experiment default seed.

    python3 scripts/calibrate_lambda.py --reps 20
"""

from __future__ import annotations

import argparse
import warnings

import numpy as np

from hetkrr import asymptotics as asy
from hetkrr.simharness import DGPSpec, _l2_error, generate, oracle_fit, sobolev_kernel


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=99)
    args = ap.parse_args(argv)
    warnings.simplefilter("ignore", RuntimeWarning)

    kernel = sobolev_kernel()
    grid = np.logspace(-9, -3, 25)
    mse = np.zeros_like(grid)
    for r in range(args.reps):
        dgp = DGPSpec(args.N, 1, seed=args.seed)
        data = generate(dgp, r)
        for i, lam in enumerate(grid):
            mse[i] += _l2_error(oracle_fit(data, kernel, lam, dgp.betas())) / args.reps
    for lam, v in zip(grid, mse):
        print(f"lambda={lam:.3e}  mse={v:.5f}")
    best = grid[int(np.argmin(mse))]
    print(f"lambda*={best:.4e}")
    for obj in asy.Objective:
        rate = asy.lambda_rule(kernel, args.N, obj)
        print(f"{obj.value}: scale = {best / rate:.3e}")


if __name__ == "__main__":
    main()
