"""Variance-matching reweighted test for one (possibly pooled) experimental arm.

The array kernels (:func:`weight_recursion`, :func:`matching_statistic`,
:func:`naive_statistic`) broadcast over any leading axes and loop explicitly
over the (few) blocks, so a batch of replications gives bit-identical results
to evaluating each replication alone.  The dataclass front end
(:func:`compute_weights`, :func:`adaptive_statistic`, :func:`finalize_test`,
:func:`naive_z`, :func:`analyze_at_block`) runs through the same kernels.

Responses enter on their natural scale; the known standard deviation ``sigma``
is divided out of the final contrast, which is the same as standardizing every
response at ingestion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import norm


def critical_value(alpha: float, two_sided: bool = False) -> float:
    """Upper standard-normal quantile used as rejection threshold."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(norm.ppf(1.0 - alpha / 2.0 if two_sided else 1.0 - alpha))


def reject(stat, alpha: float, two_sided: bool = False):
    crit = critical_value(alpha, two_sided)
    return (np.abs(stat) if two_sided else np.asarray(stat)) >= crit


def _as_counts(values, name: str) -> tuple[int, ...]:
    out = tuple(int(v) for v in values)
    if any(v != f for v, f in zip(out, values)):
        raise ValueError(f"{name} must be integers")
    return out


@dataclass(frozen=True)
class AuxiliaryArmPlan:
    """Planned patient counts on one arm: run-in plus blocks ``1..b``."""

    runin_count: int
    block_counts: tuple[int, ...]

    def __post_init__(self):
        counts = _as_counts(self.block_counts, "block_counts")
        object.__setattr__(self, "block_counts", counts)
        if not counts:
            raise ValueError("plan needs at least one block after the run-in")
        if self.runin_count < 1 or min(counts) < 1:
            raise ValueError("planned counts must all be >= 1")

    @property
    def b(self) -> int:
        return len(self.block_counts)

    @property
    def total(self) -> int:
        return self.runin_count + sum(self.block_counts)

    @property
    def tail_sums(self) -> tuple[int, ...]:
        """``tail_sums[i]`` is the planned count from block ``i + 1`` onwards; last entry is 0."""
        tails = [0]
        for n_k in reversed(self.block_counts):
            tails.append(tails[-1] + n_k)
        return tuple(reversed(tails))

    def truncate(self, last_block: int) -> "AuxiliaryArmPlan":
        if not 1 <= last_block <= self.b:
            raise ValueError(f"block index {last_block} outside 1..{self.b}")
        return AuxiliaryArmPlan(self.runin_count, self.block_counts[:last_block])


@dataclass(frozen=True)
class ObservedArmData:
    """Realized block counts and response sums on one arm (run-in count is the plan's)."""

    runin_sum: float
    block_counts: tuple[int, ...]
    block_sums: tuple[float, ...]

    def __post_init__(self):
        counts = _as_counts(self.block_counts, "block_counts")
        object.__setattr__(self, "block_counts", counts)
        object.__setattr__(self, "block_sums", tuple(float(s) for s in self.block_sums))
        if len(self.block_sums) != len(counts):
            raise ValueError("block_counts and block_sums differ in length")
        if counts and min(counts) < 1:
            raise ValueError("every block needs at least one observed patient")

    @property
    def block_means(self) -> tuple[float, ...]:
        return tuple(s / n for s, n in zip(self.block_sums, self.block_counts))

    def truncate(self, last_block: int) -> "ObservedArmData":
        return ObservedArmData(
            self.runin_sum, self.block_counts[:last_block], self.block_sums[:last_block]
        )


@dataclass(frozen=True)
class WeightTrace:
    w: tuple[float, ...]
    u: tuple[float, ...]

    @property
    def u_sum(self) -> float:
        return _ordered_sum(self.u)


@dataclass(frozen=True)
class ControlSummary:
    count: int
    mean: float
    per_block_counts: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("control count must be >= 1")


@dataclass(frozen=True)
class AdaptiveTestResult:
    t_tilde: float
    t_star: float
    std: float
    u_stat: float
    rejected: bool
    alpha: float


@dataclass(frozen=True)
class SpendingSchedule:
    """Per-block significance levels fixed before any data are seen."""

    alphas: tuple[float, ...]
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.alphas:
            raise ValueError("spending schedule is empty")
        if any(not 0.0 < a < 1.0 for a in self.alphas):
            raise ValueError("spent levels must lie in (0, 1)")
        if sum(self.alphas) > self.alpha * (1 + 1e-12):
            raise ValueError(
                f"spending schedule sums to {sum(self.alphas):.6g} > alpha = {self.alpha}"
            )

    @classmethod
    def bonferroni(cls, alpha: float, b: int) -> "SpendingSchedule":
        return cls((alpha / b,) * b, alpha)


# -- array kernels -----------------------------------------------------------


class Weights(NamedTuple):
    w: np.ndarray  # (..., b + 1)
    u: np.ndarray  # (..., b + 1)
    u_sum: np.ndarray
    total: np.ndarray


class MatchingStats(NamedTuple):
    t_tilde: np.ndarray
    u_sum: np.ndarray
    t_star: np.ndarray
    std: np.ndarray
    u_stat: np.ndarray


def _ordered_sum(values):
    acc = values[0]
    for v in values[1:]:
        acc = acc + v
    return acc


def weight_recursion(runin, planned, observed) -> Weights:
    """Block recursion ``w_k = w_{k-1} sqrt((ñ_k + n_(k+1)) / (n_k + n_(k+1)))``.

    ``planned`` and ``observed`` carry blocks on the last axis.  ``w_0`` is the
    planned arm total and ``u_k = ñ_k / w_k`` with ``ñ_0`` the run-in count.
    """
    runin = np.asarray(runin, dtype=np.float64)
    planned = np.asarray(planned, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    b = planned.shape[-1]
    tails = [np.zeros(planned.shape[:-1])]
    for k in range(b - 1, -1, -1):
        tails.append(tails[-1] + planned[..., k])
    tails.reverse()  # tails[k] = planned blocks k.. (0-based), tails[b] = 0
    total = runin + tails[0]
    w = [total]
    for k in range(b):
        rest = tails[k + 1]
        w.append(w[-1] * np.sqrt((observed[..., k] + rest) / (planned[..., k] + rest)))
    u = [runin / total] + [observed[..., k] / w[k + 1] for k in range(b)]
    return Weights(np.stack(w, axis=-1), np.stack(u, axis=-1), _ordered_sum(u), total)


def matching_statistic(
    runin, planned, observed, runin_sum, block_sums, ctrl_count, ctrl_mean, sigma=1.0
) -> MatchingStats:
    """Reweighted contrast against control, standardized to N(0, 1) under the null."""
    weights = weight_recursion(runin, planned, observed)
    runin_sum = np.asarray(runin_sum, dtype=np.float64)
    block_sums = np.asarray(block_sums, dtype=np.float64)
    terms = [weights.u[..., 0] * (runin_sum / np.asarray(runin, dtype=np.float64))]
    for k in range(block_sums.shape[-1]):
        terms.append(weights.u[..., k + 1] * (block_sums[..., k] / np.asarray(observed)[..., k]))
    t_tilde = _ordered_sum(terms)
    t_star = t_tilde - weights.u_sum * ctrl_mean
    std = np.sqrt(1.0 / weights.total + weights.u_sum**2 / np.asarray(ctrl_count, dtype=np.float64))
    return MatchingStats(t_tilde, weights.u_sum, t_star, std, t_star / sigma / std)


def naive_statistic(total_count, total_mean, ctrl_count, ctrl_mean, sigma=1.0):
    """Two-sample z statistic treating realized sample sizes as fixed."""
    total_count = np.asarray(total_count, dtype=np.float64)
    ctrl_count = np.asarray(ctrl_count, dtype=np.float64)
    return (total_mean - ctrl_mean) / (sigma * np.sqrt(1.0 / total_count + 1.0 / ctrl_count))


# -- dataclass front end ------------------------------------------------------


def compute_weights(plan: AuxiliaryArmPlan, observed_counts: Sequence[int]) -> WeightTrace:
    observed_counts = _as_counts(observed_counts, "observed_counts")
    if len(observed_counts) != plan.b:
        raise ValueError(f"expected {plan.b} observed block counts, got {len(observed_counts)}")
    if min(observed_counts) < 1:
        raise ValueError("every block needs at least one observed patient")
    res = weight_recursion(plan.runin_count, plan.block_counts, observed_counts)
    return WeightTrace(tuple(float(x) for x in res.w), tuple(float(x) for x in res.u))


def adaptive_statistic(trace: WeightTrace, data: ObservedArmData, runin_count: int) -> float:
    """Weighted sum ``Σ u_k · mean_k`` (run-in mean first)."""
    if len(trace.u) != len(data.block_counts) + 1:
        raise ValueError("weight trace and data cover different numbers of blocks")
    means = (data.runin_sum / runin_count,) + data.block_means
    return float(_ordered_sum([u * m for u, m in zip(trace.u, means)]))


def finalize_test(
    t_tilde: float,
    trace: WeightTrace,
    control: ControlSummary,
    sigma: float = 1.0,
    alpha: float = 0.05,
    two_sided: bool = False,
) -> AdaptiveTestResult:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    u_sum = trace.u_sum
    t_star = t_tilde - u_sum * control.mean
    std = math.sqrt(1.0 / trace.w[0] + u_sum**2 / control.count)
    u_stat = t_star / sigma / std
    return AdaptiveTestResult(
        t_tilde, t_star, std, u_stat, bool(reject(u_stat, alpha, two_sided)), alpha
    )


def naive_z(
    total_count: int,
    total_mean: float,
    control: ControlSummary,
    sigma: float = 1.0,
    alpha: float = 0.05,
    two_sided: bool = False,
) -> AdaptiveTestResult:
    if total_count < 1:
        raise ValueError("experimental count must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    diff = total_mean - control.mean
    std = math.sqrt(1.0 / total_count + 1.0 / control.count)
    u_stat = float(naive_statistic(total_count, total_mean, control.count, control.mean, sigma))
    return AdaptiveTestResult(
        total_mean, diff, std, u_stat, bool(reject(u_stat, alpha, two_sided)), alpha
    )


def matching_test(
    plan: AuxiliaryArmPlan,
    data: ObservedArmData,
    control: ControlSummary,
    sigma: float = 1.0,
    alpha: float = 0.05,
    two_sided: bool = False,
) -> tuple[WeightTrace, AdaptiveTestResult]:
    """compute_weights -> adaptive_statistic -> finalize_test in one call."""
    trace = compute_weights(plan, data.block_counts)
    t_tilde = adaptive_statistic(trace, data, plan.runin_count)
    return trace, finalize_test(t_tilde, trace, control, sigma, alpha, two_sided)


def analyze_at_block(
    plan: AuxiliaryArmPlan,
    data: ObservedArmData,
    block: int,
    control_at_block: ControlSummary,
    schedule: SpendingSchedule,
    sigma: float = 1.0,
    two_sided: bool = False,
) -> AdaptiveTestResult:
    """Interim analysis treating ``block`` as the last one, at the level spent there.

    The recursion is recomputed over the truncated horizon, so the weighted
    statistic has deterministic variance ``1 / (n_0 + ... + n_block)``.
    """
    if not isinstance(schedule, SpendingSchedule):
        raise TypeError("the spending schedule must be a SpendingSchedule fixed in advance")
    if len(schedule.alphas) != plan.b:
        raise ValueError(f"schedule has {len(schedule.alphas)} levels for {plan.b} blocks")
    if not 1 <= block <= plan.b:
        raise ValueError(f"block index {block} outside 1..{plan.b}")
    _, result = matching_test(
        plan.truncate(block),
        data.truncate(block),
        control_at_block,
        sigma,
        schedule.alphas[block - 1],
        two_sided,
    )
    return result
