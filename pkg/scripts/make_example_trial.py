"""Regenerate configs/example_trial.csv and configs/analysis_example.ini.

One simulated BAR trial (K = 2, deltas 0 and 0.5) written as a patient-level
dataset, plus the design section needed to analyse it with ``blockrar analyze``.
"""
from pathlib import Path

from blockrar import rng
from blockrar.engine import Scenario, simulate_trial
from blockrar.report import write_dataset

ROOT = Path(__file__).resolve().parents[1] / "configs"


def main():
    s = Scenario(K=2, deltas=(0.0, 0.5), scheme="bar", seed=2718)
    trial = simulate_trial(s, rng.ReplicationStream(s.seed, [0]))
    write_dataset(ROOT / "example_trial.csv", trial.patients)
    lines = [
        "# Design of configs/example_trial.csv: auxiliary block counts drawn before the trial.",
        "# Analyse with: blockrar analyze configs/example_trial.csv --config configs/analysis_example.ini",
        "",
        "[analysis.example]",
        f"k = {s.K}",
        f"runin_per_arm = {s.runin_per_arm}",
        "ctrl_block_sizes = " + ", ".join(map(str, s.ctrl_block_sizes)),
        "sigma = 1",
        "alpha = 0.05",
    ]
    lines += [f"plan.{j} = " + ", ".join(map(str, p.block_counts)) for j, p in enumerate(trial.plans, 1)]
    (ROOT / "analysis_example.ini").write_text("\n".join(lines) + "\n")
    for name, rej in trial.rejections.items():
        print(name, rej.rejected)


if __name__ == "__main__":
    main()
