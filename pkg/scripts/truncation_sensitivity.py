"""Variance gap between the naive and one-step estimators as the pilot truncation m grows.

Under Gaussian noise on the identity operator the two estimators share the
same first-order variance, but the one-step correction reuses the empirical
Gram matrix of the first m + 1 basis functions.  A second-order expansion gives

    n Var(naive) - n Var(one-step) = (m + 1/2) / n + o(m / n),

which this script compares against simulation.

    python scripts/truncation_sensitivity.py [--n 2000] [--replications 20000] [--seed 6]
"""

import argparse
import os

from inveff.experiment import ExperimentConfig, run_monte_carlo


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--replications", type=int, default=20000)
    p.add_argument("--seed", type=int, default=6)
    p.add_argument("--ms", type=int, nargs="+", default=[0, 2, 5, 10, 20])
    p.add_argument("--workers", type=int, default=os.cpu_count())
    args = p.parse_args()

    print(f"{'m':>3} {'difference':>11} {'se':>9} {'z':>6} {'predicted':>10}")
    for m in args.ms:
        cfg = ExperimentConfig(
            operator={"name": "identity"},
            error_model={"name": "gaussian", "sigma": 1.0},
            truth={"coefficients": [0.0]},
            target={"kind": "coefficient", "k": 0},
            n_grid=[args.n],
            replications=args.replications,
            truncation={"m": m},
            master_seed=args.seed,
        )
        c = run_monte_carlo(cfg, workers=args.workers).comparison(args.n)
        d, se = c["variance_difference"], c["variance_difference_se"]
        print(f"{m:>3} {d:>11.5f} {se:>9.5f} {d / se:>6.2f} {(m + 0.5) / args.n:>10.5f}")


if __name__ == "__main__":
    main()
