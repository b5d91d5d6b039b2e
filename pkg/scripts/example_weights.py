"""Per-block weights of single simulated trials (arm means 0 and 1, K = 2).

For each arm prints observed counts, auxiliary counts, w_k and u_k, under BAR
and under the error inflator.
"""
import argparse

from blockrar import rng
from blockrar.core import compute_weights
from blockrar.engine import Scenario, simulate_trial


def show(scheme, seed):
    s = Scenario(K=2, deltas=(0.0, 1.0), scheme=scheme, seed=seed)
    trial = simulate_trial(s, rng.ReplicationStream(s.seed, [0]))
    print(f"\n{scheme}, seed {seed}")
    for j, (plan, data) in enumerate(zip(trial.plans, trial.data), start=1):
        trace = compute_weights(plan, data.block_counts)
        observed = (plan.runin_count,) + data.block_counts
        planned = (plan.runin_count,) + plan.block_counts
        print(f"  arm {j}: sum u = {trace.u_sum:.4f}")
        print("    block  observed  planned        w_k      u_k")
        for k, (o, p, w, u) in enumerate(zip(observed, planned, trace.w, trace.u)):
            print(f"    {k:>5}  {o:>8}  {p:>7}  {w:9.4f}  {u:7.4f}")
    for name, rej in trial.rejections.items():
        print(f"  {name:<13} rejects arms {[j for j in (1, 2) if rej[j]] or 'none'}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2020)
    args = ap.parse_args()
    for scheme in ("bar", "inflator"):
        show(scheme, args.seed)


if __name__ == "__main__":
    main()
