"""Run a Monte Carlo config and print a compact variance table.

    python scripts/run_study.py configs/exp_logistic_identity.json [--workers N] [--replications R]
"""

import argparse
import os

from inveff.experiment import ExperimentConfig, run_monte_carlo


def _f(v, spec):
    return format(v, spec) if v is not None else format("-", spec[:-2].rstrip(".") or ">")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=os.cpu_count())
    p.add_argument("--replications", type=int)
    args = p.parse_args()

    cfg = ExperimentConfig.load(args.config)
    if args.replications:
        cfg.replications = args.replications
    res = run_monte_carlo(cfg, workers=args.workers)

    print(f"{'n':>6} {'m':>3} {'estimator':>9} {'variance':>10} {'se':>8} {'/optimal':>9} {'/plugin':>8}")
    for r in res.rows:
        print(f"{r['n']:>6} {r['m']:>3} {r['estimator']:>9} {r['variance']:>10.4f} {_f(r['variance_se'], '>8.4f')} "
              f"{r['ratio_to_optimal']:>9.4f} {r['ratio_to_plugin']:>8.4f}")
    for c in res.comparisons:
        se = c["variance_difference_se"]
        z = f"{c['variance_difference'] / se:.2f} SE" if se else "no SE"
        print(f"n={c['n']}: naive - one_step = {c['variance_difference']:.5f} ({z})")
    print(f"wall time {res.wall_time_s:.1f}s")


if __name__ == "__main__":
    main()
