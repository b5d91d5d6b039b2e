"""Block-wise allocation rules for the experimental arms.

Control allocation is fixed per block and never passes through here.  All
rules draw patients independently within a block from probabilities frozen at
the start of the block, then apply the last-K* fix: once the number of slots
left equals the number of arms still empty, the remaining slots go one each
to the empty arms (in arm order).

Batch kernels take an explicit array of uniforms, one row per replication,
so the simulator can feed them counter-based draws.  The scalar API takes a
``numpy.random.Generator``.  Arm indices in arrays are 0-based (column 0 is
experimental arm 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import AuxiliaryArmPlan

CROSSING_MODES = ("reevaluate", "absorbing")


@dataclass(frozen=True)
class BarParams:
    prior_means: tuple[float, ...]  # index 0 is control
    prior_vars: tuple[float, ...]
    gamma: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "prior_means", tuple(float(x) for x in self.prior_means))
        object.__setattr__(self, "prior_vars", tuple(float(x) for x in self.prior_vars))
        if len(self.prior_means) != len(self.prior_vars):
            raise ValueError("one prior mean and variance per arm")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if min(self.prior_vars) <= 0:
            raise ValueError("prior variances must be positive")

    @classmethod
    def default(cls, K: int, gamma: float = 0.5) -> "BarParams":
        return cls((0.0,) * (K + 1), (1.0,) * (K + 1), gamma)


@dataclass(frozen=True)
class InflatorParams:
    threshold: float = 0.5
    crossing_mode: str = "reevaluate"

    def __post_init__(self):
        if self.crossing_mode not in CROSSING_MODES:
            raise ValueError(f"crossing_mode must be one of {CROSSING_MODES}")


@dataclass(frozen=True)
class AllocationResult:
    counts: tuple[int, ...]
    crossed: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))


# -- batch kernels --------------------------------------------------------------


def draw_with_fix(pi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-slot arm draws (R, size) from probabilities ``pi`` (R, K) with the last-K* fix."""
    R, size = u.shape
    K = pi.shape[1]
    if size < K:
        raise ValueError(f"block of {size} cannot give each of {K} arms a patient")
    cuts = np.cumsum(pi, axis=1)[:, :-1]
    arms = (u[:, :, None] >= cuts[:, None, :]).sum(axis=2)
    onehot = arms[:, :, None] == np.arange(K)
    seen = np.zeros((R, size + 1, K), dtype=bool)
    seen[:, 1:] = np.logical_or.accumulate(onehot, axis=1)
    repeats = np.arange(size + 1) - seen.sum(axis=2)
    stop = np.argmax(repeats == size - K, axis=1)  # first slot handed to the fix
    empty = ~seen[np.arange(R), stop]
    rank = np.cumsum(empty, axis=1) - 1
    offset = np.arange(size) - stop[:, None]
    for j in range(K):
        hit = (offset >= 0) & empty[:, j : j + 1] & (offset == rank[:, j : j + 1])
        arms[hit] = j
    return arms


def slot_counts(arms: np.ndarray, K: int) -> np.ndarray:
    return (arms[:, :, None] == np.arange(K)).sum(axis=1)


def posterior_batch(prior_means, prior_vars, counts, sums):
    """Conjugate normal posterior for unit-variance responses; broadcasts over arms."""
    prior_means = np.asarray(prior_means, dtype=np.float64)
    prior_vars = np.asarray(prior_vars, dtype=np.float64)
    denom = 1.0 + counts * prior_vars
    return (prior_vars * sums + prior_means) / denom, prior_vars / denom


def bar_pi_batch(params: BarParams, counts: np.ndarray, sums: np.ndarray) -> np.ndarray:
    """BAR allocation probabilities (R, K) from per-arm totals (R, K + 1), column 0 control."""
    mean, var = posterior_batch(params.prior_means, params.prior_vars, counts, sums)
    p = ndtr((mean[:, 1:] - mean[:, :1]) / np.sqrt(var[:, 1:] + var[:, :1]))
    return bar_probabilities_batch(p, params.gamma)


def bar_probabilities_batch(p: np.ndarray, gamma: float) -> np.ndarray:
    if gamma == 0:
        return np.full(p.shape, 1.0 / p.shape[1])
    powered = p**gamma
    total = powered.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("all superiority probabilities are zero")
    return powered / total


def inflator_batch(params: InflatorParams, arm1_mean, crossed_before, u: np.ndarray, K: int):
    """Error-inflator slot draws (R, size) and the updated crossing state."""
    R, size = u.shape
    if size < K:
        raise ValueError(f"block of {size} cannot give each of {K} arms a patient")
    above = np.asarray(arm1_mean) > params.threshold
    crossed = above | crossed_before if params.crossing_mode == "absorbing" else above
    arms = np.zeros((R, size), dtype=np.int64)
    arms[:, size - (K - 1) :] = np.arange(1, K)
    if K > 1 and crossed.any():
        rows = np.flatnonzero(crossed)
        others = np.full((len(rows), K - 1), 1.0 / (K - 1))
        arms[rows, 0] = 0
        arms[rows, 1:] = 1 + draw_with_fix(others, u[rows, 1:])
    return arms, crossed


def uniform_batch(u: np.ndarray, K: int) -> np.ndarray:
    return draw_with_fix(np.full((u.shape[0], K), 1.0 / K), u)


# -- scalar API -----------------------------------------------------------------


def posterior_update(params: BarParams, arm: int, count: int, total: float) -> tuple[float, float]:
    """Posterior (mean, variance) of arm ``arm`` (0 = control) on the unit-variance scale."""
    if count < 0:
        raise ValueError("count must be >= 0")
    mean, var = posterior_batch(params.prior_means[arm], params.prior_vars[arm], count, total)
    return float(mean), float(var)


def superiority_prob(post_i: tuple[float, float], post_0: tuple[float, float]) -> float:
    """P(mu_i > mu_0) under independent normal posteriors."""
    (m_i, v_i), (m_0, v_0) = post_i, post_0
    if v_i <= 0 or v_0 <= 0:
        raise ValueError("posterior variances must be positive")
    return float(ndtr((m_i - m_0) / np.sqrt(v_i + v_0)))


def bar_probabilities(probs: Sequence[float], gamma: float = 0.5) -> tuple[float, ...]:
    p = np.asarray(probs, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    return tuple(float(x) for x in bar_probabilities_batch(p[None, :], gamma)[0])


def allocate_block(pi: Sequence[float], size: int, rng: np.random.Generator) -> AllocationResult:
    pi = np.asarray(pi, dtype=np.float64)
    if np.any(pi < 0) or not np.isclose(pi.sum(), 1.0):
        raise ValueError("pi must be a probability vector")
    arms = draw_with_fix(pi[None, :], rng.random((1, size)))
    return AllocationResult(slot_counts(arms, len(pi))[0])


def fixed_allocate(K: int, size: int, rng: np.random.Generator) -> AllocationResult:
    return AllocationResult(slot_counts(uniform_batch(rng.random((1, size)), K), K)[0])


def inflator_allocate(
    arm1_mean_so_far: float,
    crossed_state: bool,
    params: InflatorParams,
    size: int,
    K: int,
    rng: np.random.Generator,
) -> AllocationResult:
    """One inflator block for a single trial.

    ``arm1_mean_so_far`` is whatever level is compared with the threshold.
    The engine passes the arm-1 mean minus the control mean by default
    (``Scenario.inflator_statistic = "contrast"``), or the raw arm-1 mean.
    """
    arms, crossed = inflator_batch(
        params, np.array([arm1_mean_so_far]), np.array([crossed_state]), rng.random((1, size)), K
    )
    return AllocationResult(slot_counts(arms, K)[0], bool(crossed[0]))


def sample_auxiliary(
    K: int, block_sizes: Sequence[int], runin_per_arm: int, rng: np.random.Generator
) -> list[AuxiliaryArmPlan]:
    """Auxiliary design: uniform draws over arms in every block, min-one fixed."""
    counts = np.stack(
        [slot_counts(uniform_batch(rng.random((1, s)), K), K)[0] for s in block_sizes], axis=1
    )
    return [AuxiliaryArmPlan(runin_per_arm, tuple(row)) for row in counts]
