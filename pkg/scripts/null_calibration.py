"""Null distribution of the per-arm adaptive statistic under each allocation scheme.

Prints mean, variance and upper 5% exceedance of U for every arm with all
effects zero.  Use --reps 1000000 for a tighter look at small biases.
"""
import argparse
import dataclasses

import numpy as np

from blockrar.engine import Scenario, collect_arm_stats

Z95 = 1.6448536269514722


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--method", choices=("matching", "naive"), default="matching")
    args = ap.parse_args()

    base = Scenario(K=args.k, deltas=(0.0,) * args.k, reps=args.reps, seed=args.seed)
    variants = [
        ("bar", {}),
        ("inflator", {"inflator_statistic": "contrast"}),
        ("inflator", {"inflator_statistic": "arm-mean"}),
        ("fixed", {}),
    ]
    print(f"{'scheme':<24} arm    mean     se     var   P(U>=z)")
    for scheme, extra in variants:
        s = dataclasses.replace(base, scheme=scheme, **extra)
        stats = collect_arm_stats(s, args.method)
        label = scheme + (f" ({extra['inflator_statistic']})" if extra else "")
        for j in range(s.K):
            u = stats[:, j]
            print(
                f"{label:<24} {j + 1:>3} {u.mean():+.4f} {u.std() / np.sqrt(len(u)):.4f} "
                f"{u.var():.4f}  {(u >= Z95).mean():.4f}"
            )


if __name__ == "__main__":
    main()
