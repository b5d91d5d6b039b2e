"""Monte Carlo engine: simulate block-randomized trials and estimate FWER / power.

Replications are simulated in vectorized batches.  All randomness comes from
:mod:`blockrar.rng`, keyed by (seed, replication, stream label, block, slot),
so a replication's data do not depend on batch composition, chunking or the
number of worker processes.  Aggregation is by integer counts, which makes
the report a pure function of the scenario.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import rng as streams
from .core import (
    AuxiliaryArmPlan,
    ControlSummary,
    ObservedArmData,
    matching_statistic,
    naive_statistic,
    reject,
    weight_recursion,
)
from .multiplicity import RejectionSet, closure_batch, holm_batch, subsets
from .schemes import (
    BarParams,
    CROSSING_MODES,
    InflatorParams,
    bar_pi_batch,
    draw_with_fix,
    inflator_batch,
    uniform_batch,
)

SCHEMES = ("bar", "inflator", "fixed")
INFLATOR_STATISTICS = ("contrast", "arm-mean")
METHOD_NAMES = ("naive-closed", "new-closed", "naive-holm", "new-holm")
SPENDING_SUFFIX = "-spending"
CHUNK_SIZE = 5000


@dataclass(frozen=True)
class Scenario:
    K: int
    deltas: tuple[float, ...]
    scheme: str = "fixed"
    exp_block_size: int = 40
    ctrl_block_sizes: tuple[int, ...] = (20, 20, 20)
    runin_per_arm: int = 5
    mu0: float = 0.0
    sigma: float = 1.0
    alpha: float = 0.05
    gamma: float = 0.5
    prior_mean: float = 0.0
    prior_var: float = 1.0
    threshold: float = 0.5
    crossing_mode: str = "reevaluate"
    inflator_statistic: str = "contrast"
    methods: tuple[str, ...] = METHOD_NAMES
    spending: tuple[float, ...] | None = None
    two_sided: bool = False
    reps: int = 100_000
    seed: int = 1
    name: str = "scenario"

    def __post_init__(self):
        for attr in ("deltas", "ctrl_block_sizes", "methods"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if self.spending is not None:
            object.__setattr__(self, "spending", tuple(float(a) for a in self.spending))
        checks = [
            (self.K >= 1, "K", "must be >= 1"),
            (len(self.deltas) == self.K, "deltas", f"needs {self.K} entries"),
            (self.scheme in SCHEMES, "scheme", f"must be one of {SCHEMES}"),
            (self.exp_block_size >= self.K, "exp_block_size", "must be >= K"),
            (len(self.ctrl_block_sizes) >= 1, "ctrl_block_sizes", "needs at least one block"),
            (min(self.ctrl_block_sizes, default=0) >= 0, "ctrl_block_sizes", "must be >= 0"),
            (self.runin_per_arm >= 1, "runin_per_arm", "must be >= 1"),
            (self.sigma > 0, "sigma", "must be positive"),
            (0 < self.alpha < 1, "alpha", "must be in (0, 1)"),
            (self.gamma >= 0, "gamma", "must be >= 0"),
            (self.prior_var > 0, "prior_var", "must be positive"),
            (self.crossing_mode in CROSSING_MODES, "crossing_mode", f"must be one of {CROSSING_MODES}"),
            (self.inflator_statistic in INFLATOR_STATISTICS, "inflator_statistic",
             f"must be one of {INFLATOR_STATISTICS}"),
            (bool(self.methods), "methods", "must not be empty"),
            (set(self.methods) <= set(METHOD_NAMES), "methods", f"must be drawn from {METHOD_NAMES}"),
            (len(set(self.methods)) == len(self.methods), "methods", "must not repeat"),
            (self.reps >= 1, "reps", "must be >= 1"),
            (0 <= self.seed < 2**64, "seed", "must be in [0, 2**64)"),
        ]
        if self.spending is not None:
            checks += [
                (len(self.spending) == self.b, "spending", f"needs {self.b} levels"),
                (all(0 < a < 1 for a in self.spending), "spending", "levels must be in (0, 1)"),
                (sum(self.spending) <= self.alpha * (1 + 1e-12), "spending", "sums above alpha"),
            ]
        for ok, name, msg in checks:
            if not ok:
                raise ValueError(f"{name}: {msg}")

    @property
    def b(self) -> int:
        return len(self.ctrl_block_sizes)

    @property
    def control_total(self) -> int:
        return self.runin_per_arm + sum(self.ctrl_block_sizes)

    @property
    def arm_means(self) -> np.ndarray:
        return self.mu0 + np.asarray(self.deltas, dtype=np.float64)

    def bar_params(self) -> BarParams:
        return BarParams(
            (self.prior_mean,) * (self.K + 1), (self.prior_var,) * (self.K + 1), self.gamma
        )

    def inflator_params(self) -> InflatorParams:
        return InflatorParams(self.threshold, self.crossing_mode)

    def report_methods(self) -> tuple[str, ...]:
        extra = ()
        if self.spending is not None:
            extra = tuple(m + SPENDING_SUFFIX for m in self.methods if m.startswith("new-"))
        return self.methods + extra


class Batch(NamedTuple):
    """Sufficient statistics of R simulated trials (arm axis 0-based)."""

    planned: np.ndarray  # (R, K, b) auxiliary counts
    observed: np.ndarray  # (R, K, b)
    block_sums: np.ndarray  # (R, K, b)
    runin_sums: np.ndarray  # (R, K)
    ctrl_runin_sum: np.ndarray  # (R,)
    ctrl_block_sums: np.ndarray  # (R, b)
    patients: list | None  # per replication list of (block, arm, response) when kept


def _arm_sums(arms: np.ndarray, values: np.ndarray, K: int) -> np.ndarray:
    # cumsum accumulates strictly in slot order, independent of array shape
    masked = np.where(arms[:, :, None] == np.arange(K), values[:, :, None], 0.0)
    return np.cumsum(masked, axis=1)[:, -1, :]


def _seq_sum(values: np.ndarray) -> np.ndarray:
    return np.cumsum(values, axis=-1)[..., -1]


def simulate_batch(scenario: Scenario, stream: streams.ReplicationStream, keep_patients=False) -> Batch:
    s = scenario
    R, K, b, size, n0 = len(stream), s.K, s.b, s.exp_block_size, s.runin_per_arm
    means = s.arm_means

    planned = np.empty((R, K, b), dtype=np.int64)
    for k in range(b):
        aux = uniform_batch(stream.uniforms(streams.AUXILIARY, k + 1, size), K)
        planned[:, :, k] = (aux[:, :, None] == np.arange(K)).sum(axis=1)

    z = stream.normals(streams.RESPONSE_RUNIN, 0, (K + 1) * n0).reshape(R, K + 1, n0)
    runin = np.concatenate([[s.mu0], means])[None, :, None] + s.sigma * z
    sums = _seq_sum(runin)
    ctrl_runin_sum, runin_sums = sums[:, 0], sums[:, 1:]
    patients = None
    if keep_patients:
        patients = [
            [(0, arm, float(runin[r, arm, i])) for arm in range(K + 1) for i in range(n0)]
            for r in range(R)
        ]

    observed = np.empty((R, K, b), dtype=np.int64)
    block_sums = np.empty((R, K, b))
    ctrl_block_sums = np.empty((R, b))
    # running totals on the response scale through the previous block; column 0 = control
    counts_so_far = np.tile(np.full(K + 1, n0, dtype=np.float64), (R, 1))
    sums_so_far = sums.copy()
    crossed = np.zeros(R, dtype=bool)

    for k in range(1, b + 1):
        u = stream.uniforms(streams.ALLOCATION, k, size)
        if s.scheme == "fixed":
            arms = uniform_batch(u, K)
        elif s.scheme == "bar":
            pi = bar_pi_batch(s.bar_params(), counts_so_far, sums_so_far / s.sigma)
            arms = draw_with_fix(pi, u)
        else:
            level = sums_so_far[:, 1] / counts_so_far[:, 1]
            if s.inflator_statistic == "contrast":
                level = level - sums_so_far[:, 0] / counts_so_far[:, 0]
            arms, crossed = inflator_batch(s.inflator_params(), level, crossed, u, K)

        resp = means[arms] + s.sigma * stream.normals(streams.RESPONSE_EXPERIMENTAL, k, size)
        m_k = s.ctrl_block_sizes[k - 1]
        ctrl = s.mu0 + s.sigma * stream.normals(streams.RESPONSE_CONTROL, k, m_k)

        observed[:, :, k - 1] = (arms[:, :, None] == np.arange(K)).sum(axis=1)
        block_sums[:, :, k - 1] = _arm_sums(arms, resp, K)
        ctrl_block_sums[:, k - 1] = _seq_sum(ctrl) if m_k else 0.0

        counts_so_far[:, 1:] += observed[:, :, k - 1]
        counts_so_far[:, 0] += m_k
        sums_so_far[:, 1:] += block_sums[:, :, k - 1]
        sums_so_far[:, 0] += ctrl_block_sums[:, k - 1]

        if keep_patients:
            for r in range(R):
                patients[r] += [(k, 0, float(x)) for x in ctrl[r]]
                patients[r] += [(k, int(a) + 1, float(x)) for a, x in zip(arms[r], resp[r])]

    return Batch(planned, observed, block_sums, runin_sums, ctrl_runin_sum, ctrl_block_sums, patients)


# -- statistics over a batch -------------------------------------------------------


def _pool(arr: np.ndarray, J: Sequence[int]) -> np.ndarray:
    out = arr[:, J[0] - 1]
    for j in J[1:]:
        out = out + arr[:, j - 1]
    return out


def control_at(scenario: Scenario, batch: Batch, last_block: int) -> tuple[int, np.ndarray]:
    """Control count and mean through ``last_block`` (block sums accumulated first)."""
    count = scenario.runin_per_arm + sum(scenario.ctrl_block_sizes[:last_block])
    total = batch.ctrl_runin_sum
    for k in range(last_block):
        total = total + batch.ctrl_block_sums[:, k]
    return count, total / count


def intersection_stats(scenario: Scenario, batch: Batch, J, method: str, last_block: int | None = None):
    """Statistic for H_J on pooled arms, optionally truncated after ``last_block``."""
    F = scenario.b if last_block is None else last_block
    m, zbar = control_at(scenario, batch, F)
    runin = scenario.runin_per_arm * len(J)
    observed = _pool(batch.observed, J)[:, :F]
    block_sums = _pool(batch.block_sums, J)[:, :F]
    runin_sum = _pool(batch.runin_sums, J)
    if method == "naive":
        count = runin + _seq_sum(observed)
        total = runin_sum
        for k in range(F):
            total = total + block_sums[:, k]
        return naive_statistic(count, total / count, m, zbar, scenario.sigma), None
    planned = _pool(batch.planned, J)[:, :F]
    res = matching_statistic(runin, planned, observed, runin_sum, block_sums, m, zbar, scenario.sigma)
    return res.u_stat, res


def arm_stats(scenario: Scenario, batch: Batch, method: str, last_block: int | None = None) -> np.ndarray:
    return np.stack(
        [intersection_stats(scenario, batch, (j,), method, last_block)[0] for j in range(1, scenario.K + 1)],
        axis=1,
    )


def _decisions(scenario: Scenario, batch: Batch, method: str, alpha: float, last_block=None):
    kind, procedure = method.split("-")
    stat_kind = "naive" if kind == "naive" else "matching"
    if procedure == "holm":
        return holm_batch(arm_stats(scenario, batch, stat_kind, last_block), alpha, scenario.two_sided)
    return closure_batch(
        scenario.K,
        lambda J: reject(
            intersection_stats(scenario, batch, J, stat_kind, last_block)[0], alpha, scenario.two_sided
        ),
    )


def apply_methods(scenario: Scenario, batch: Batch) -> dict[str, np.ndarray]:
    """Rejection matrices (R, K) per reported method."""
    out = {m: _decisions(scenario, batch, m, scenario.alpha) for m in scenario.methods}
    if scenario.spending is not None:
        for m in scenario.methods:
            if not m.startswith("new-"):
                continue
            rej = np.zeros_like(out[m])
            for F, alpha_F in enumerate(scenario.spending, start=1):
                rej |= _decisions(scenario, batch, m, alpha_F, last_block=F)
            out[m + SPENDING_SUFFIX] = rej
    return out


def matching_weights(scenario: Scenario, batch: Batch, J) -> np.ndarray:
    """Weights u_k (R, b + 1) of the pooled arms ``J``."""
    runin = scenario.runin_per_arm * len(J)
    return weight_recursion(runin, _pool(batch.planned, J), _pool(batch.observed, J)).u


# -- single trial -----------------------------------------------------------------


@dataclass(frozen=True)
class TrialRealization:
    plans: tuple[AuxiliaryArmPlan, ...]
    data: tuple[ObservedArmData, ...]
    control: ControlSummary
    rejections: dict[str, RejectionSet]
    patients: tuple = field(default=(), compare=False)


def simulate_trial(scenario: Scenario, stream: streams.ReplicationStream) -> TrialRealization:
    """Simulate and analyse the single replication carried by ``stream``."""
    if len(stream) != 1:
        raise ValueError("simulate_trial takes a stream for exactly one replication")
    batch = simulate_batch(scenario, stream, keep_patients=True)
    plans = tuple(
        AuxiliaryArmPlan(scenario.runin_per_arm, tuple(batch.planned[0, j])) for j in range(scenario.K)
    )
    data = tuple(
        ObservedArmData(
            float(batch.runin_sums[0, j]), tuple(batch.observed[0, j]), tuple(batch.block_sums[0, j])
        )
        for j in range(scenario.K)
    )
    m, zbar = control_at(scenario, batch, scenario.b)
    control = ControlSummary(m, float(zbar[0]), tuple(scenario.ctrl_block_sizes))
    rejections = {
        name: RejectionSet(tuple(bool(x) for x in rej[0]))
        for name, rej in apply_methods(scenario, batch).items()
    }
    patients = tuple(batch.patients[0])
    return TrialRealization(plans, data, control, rejections, patients)


# -- operating characteristics -----------------------------------------------------


@dataclass(frozen=True)
class OperatingCharacteristics:
    fwer: float | None
    power: float | None
    fwer_se: float | None
    power_se: float | None


def _rate(count: int, reps: int) -> tuple[float, float]:
    p = count / reps
    return p, math.sqrt(p * (1.0 - p) / reps)


def count_events(rejections: np.ndarray, deltas: Sequence[float]) -> tuple[int, int]:
    """Replications rejecting >= 1 true null, and >= 1 false null."""
    null = np.asarray(deltas) == 0
    rejections = np.asarray(rejections, dtype=bool)
    return int(rejections[:, null].any(axis=1).sum()), int(rejections[:, ~null].any(axis=1).sum())


def estimate_oc(rejections, deltas: Sequence[float]) -> OperatingCharacteristics:
    """FWER and disjunctive power from per-replication decisions (R, K).

    Accepts either a boolean array or a sequence of :class:`RejectionSet`.
    """
    if len(rejections) and isinstance(rejections[0], RejectionSet):
        rejections = np.array([r.rejected for r in rejections], dtype=bool)
    rejections = np.asarray(rejections, dtype=bool)
    return oc_from_counts(*count_events(rejections, deltas), len(rejections), deltas)


def oc_from_counts(error_count: int, power_count: int, reps: int, deltas) -> OperatingCharacteristics:
    has_null = any(d == 0 for d in deltas)
    has_alt = any(d != 0 for d in deltas)
    fwer, fwer_se = _rate(error_count, reps) if has_null else (None, None)
    power, power_se = _rate(power_count, reps) if has_alt else (None, None)
    return OperatingCharacteristics(fwer, power, fwer_se, power_se)


@dataclass(frozen=True)
class MethodResult:
    scenario_id: str
    method: str
    error_count: int
    power_count: int
    oc: OperatingCharacteristics
    reps: int
    seed: int


@dataclass(frozen=True)
class SimulationReport:
    rows: tuple[MethodResult, ...]
    min_u: float
    wall_time: float = field(default=0.0, compare=False)


def _run_chunk(args) -> tuple[dict[str, tuple[int, int]], float]:
    scenario, start, stop = args
    batch = simulate_batch(scenario, streams.ReplicationStream(scenario.seed, np.arange(start, stop)))
    counts = {
        name: count_events(rej, scenario.deltas) for name, rej in apply_methods(scenario, batch).items()
    }
    low = math.inf
    for J in subsets(scenario.K):
        low = min(low, float(matching_weights(scenario, batch, J).min()))
    return counts, low


def chunks(reps: int, size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(a, min(a + size, reps)) for a in range(0, reps, size)]


def run_replications(scenario: Scenario, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> SimulationReport:
    """Simulate ``scenario.reps`` trials; the report does not depend on ``workers``."""
    t0 = time.perf_counter()
    jobs = [(scenario, a, z) for a, z in chunks(scenario.reps, chunk_size)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(job) for job in jobs]

    rows = []
    for name in scenario.report_methods():
        err = sum(r[0][name][0] for r in results)
        pw = sum(r[0][name][1] for r in results)
        rows.append(
            MethodResult(
                scenario.name, name, err, pw,
                oc_from_counts(err, pw, scenario.reps, scenario.deltas),
                scenario.reps, scenario.seed,
            )
        )
    min_u = min(r[1] for r in results)
    return SimulationReport(tuple(rows), min_u, time.perf_counter() - t0)


def collect_arm_stats(scenario: Scenario, method: str = "matching", chunk_size: int = CHUNK_SIZE) -> np.ndarray:
    """Per-arm final statistics (reps, K) in replication order."""
    out = []
    for a, z in chunks(scenario.reps, chunk_size):
        batch = simulate_batch(scenario, streams.ReplicationStream(scenario.seed, np.arange(a, z)))
        out.append(arm_stats(scenario, batch, method))
    return np.concatenate(out)
