"""Closed testing via arm pooling, and Holm step-down on per-arm max statistics.

Arms are numbered ``1..K`` in the public API (0 is control).  The ``*_batch``
functions take arrays with a leading replication axis and the arm axis next.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    AuxiliaryArmPlan,
    ControlSummary,
    ObservedArmData,
    critical_value,
    matching_test,
    naive_z,
)

METHODS = ("naive", "matching")


def subsets(K: int) -> list[tuple[int, ...]]:
    """All nonempty subsets of ``1..K`` (as sorted tuples), smallest first."""
    return [J for size in range(1, K + 1) for J in combinations(range(1, K + 1), size)]


@dataclass(frozen=True)
class HypothesisFamily:
    plans: tuple[AuxiliaryArmPlan, ...]
    data: tuple[ObservedArmData, ...]
    control: ControlSummary
    alpha: float = 0.05
    method: str = "matching"
    sigma: float = 1.0
    two_sided: bool = False

    def __post_init__(self):
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "data", tuple(self.data))
        if not self.plans:
            raise ValueError("need at least one experimental arm")
        if len(self.plans) != len(self.data):
            raise ValueError("one plan and one data record per arm")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        b = self.plans[0].b
        if any(p.b != b for p in self.plans) or any(len(d.block_counts) != b for d in self.data):
            raise ValueError("all arms must share the same number of blocks")

    @property
    def K(self) -> int:
        return len(self.plans)


@dataclass(frozen=True)
class RejectionSet:
    rejected: tuple[bool, ...]
    intersections: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, arm: int) -> bool:
        return self.rejected[arm - 1]


def pool_arms(J: Iterable[int], family: HypothesisFamily) -> tuple[AuxiliaryArmPlan, ObservedArmData]:
    J = sorted(set(J))
    if not J:
        raise ValueError("arm subset must be nonempty")
    if J[0] < 1 or J[-1] > family.K:
        raise ValueError(f"arm indices must lie in 1..{family.K}")
    plans = [family.plans[j - 1] for j in J]
    data = [family.data[j - 1] for j in J]
    plan = AuxiliaryArmPlan(
        sum(p.runin_count for p in plans),
        tuple(sum(col) for col in zip(*(p.block_counts for p in plans))),
    )
    pooled = ObservedArmData(
        sum(d.runin_sum for d in data),
        tuple(sum(col) for col in zip(*(d.block_counts for d in data))),
        tuple(sum(col) for col in zip(*(d.block_sums for d in data))),
    )
    return plan, pooled


def arm_test(plan: AuxiliaryArmPlan, data: ObservedArmData, family: HypothesisFamily, alpha: float):
    """Single (possibly pooled) arm test under the family's method."""
    if family.method == "naive":
        count = plan.runin_count + sum(data.block_counts)
        total = data.runin_sum
        for block_sum in data.block_sums:
            total += block_sum
        mean = total / count
        return naive_z(count, mean, family.control, family.sigma, alpha, family.two_sided)
    _, result = matching_test(plan, data, family.control, family.sigma, alpha, family.two_sided)
    return result


def closed_test(family: HypothesisFamily) -> RejectionSet:
    results = {}
    for J in subsets(family.K):
        plan, data = pool_arms(J, family)
        results[J] = arm_test(plan, data, family, family.alpha)
    rejected = tuple(
        all(res.rejected for J, res in results.items() if j in J) for j in range(1, family.K + 1)
    )
    return RejectionSet(rejected, results)


def arm_statistics(family: HypothesisFamily) -> list[float]:
    return [
        arm_test(family.plans[j], family.data[j], family, family.alpha).u_stat
        for j in range(family.K)
    ]


def holm_stepdown(u_stats: Sequence[float], alpha: float = 0.05, two_sided: bool = False) -> RejectionSet:
    if len(u_stats) == 0:
        raise ValueError("need at least one statistic")
    decisions = holm_batch(np.asarray(u_stats, dtype=np.float64)[None, :], alpha, two_sided)[0]
    return RejectionSet(tuple(bool(x) for x in decisions))


# -- batch versions ------------------------------------------------------------


def closure_batch(K: int, intersection_rejects: Callable[[tuple[int, ...]], np.ndarray]) -> np.ndarray:
    """Elementary decisions (R, K) from a per-subset rejection rule."""
    out = None
    for J in subsets(K):
        rej = np.asarray(intersection_rejects(J), dtype=bool)
        if out is None:
            out = np.ones(rej.shape + (K,), dtype=bool)
        for j in J:
            out[..., j - 1] &= rej
    return out


def holm_batch(stats: np.ndarray, alpha: float, two_sided: bool = False) -> np.ndarray:
    """Holm step-down on rows of ``stats`` (R, K); ties resolved in arm order."""
    stats = np.abs(stats) if two_sided else stats
    R, K = stats.shape
    order = np.argsort(-stats, axis=1, kind="stable")
    ranked = np.take_along_axis(stats, order, axis=1)
    crit = np.array([critical_value(alpha / (K - i), two_sided) for i in range(K)])
    passed = np.logical_and.accumulate(ranked >= crit, axis=1)
    out = np.zeros_like(passed)
    np.put_along_axis(out, order, passed, axis=1)
    return out
