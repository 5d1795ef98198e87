"""Run the Monte Carlo experiments and write their CSVs.

    python3 scripts/run_experiments.py --out results            # full default grids
    python3 scripts/run_experiments.py --quick --only mse power # small grids, a few minutes

Each experiment writes ``<name>_summary.csv`` and ``<name>_replicates.csv``;
the divide-and-conquer run also writes ``dc_timing.csv``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import time

from hetkrr import __version__
from hetkrr import simharness as sh
from hetkrr.simharness import ExperimentConfig

# full grids per experiment; ``--quick`` trims N, s and R
FULL = {
    "coverage": ExperimentConfig(),
    "mse": ExperimentConfig(R=100),
    "ci": ExperimentConfig(ss=(1, 2, 4, 8, 16, 32, 64)),
    "power": ExperimentConfig(ss=(4,)),
    "dc": ExperimentConfig(ss=(1, 2, 4, 8)),
    "simul": ExperimentConfig(Ns=(2048,), ss=(16,), R=500),
}
QUICK = dict(Ns=(512, 1024), R=40)


def config_for(name: str, quick: bool, args) -> ExperimentConfig:
    cfg = FULL[name]
    changes = dict(QUICK) if quick else {}
    if name == "simul" and quick:
        changes["Ns"] = (1024,)
    if args.reps:
        changes["R"] = args.reps
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.lambda_scale is not None:
        changes["lambda_scale"] = args.lambda_scale
    changes["workers"] = args.workers
    return dataclasses.replace(cfg, **changes)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="+", choices=sorted(sh.EXPERIMENTS), default=sorted(sh.EXPERIMENTS))
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--reps", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--lambda-scale", type=float, default=None,
                    help="rate constant for lambda (default: calibrated constants)")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args(argv)

    os.makedirs(args.out, exist_ok=True)
    for name in args.only:
        cfg = config_for(name, args.quick, args)
        header = f"hetkrr {__version__} experiment={name} seed={cfg.seed} R={cfg.R}"
        t0 = time.perf_counter()
        if name == "dc":
            res = sh.experiment_homogeneous_dc(cfg, record_timing=True)
        else:
            res = sh.EXPERIMENTS[name](cfg)
        paths = res.write(args.out, header)
        with open(os.path.join(args.out, f"{name}_config.json"), "w") as fh:
            json.dump(sh.config_dict(cfg), fh, indent=2, sort_keys=True)
        print(f"{name}: {time.perf_counter() - t0:.1f}s -> {', '.join(paths)}")


if __name__ == "__main__":
    main()
