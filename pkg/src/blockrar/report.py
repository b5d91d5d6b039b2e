"""Report CSV output, patient-level dataset ingestion and real-data analysis."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .config import AnalysisDesign
from .core import ControlSummary, ObservedArmData, WeightTrace, compute_weights
from .engine import SimulationReport
from .multiplicity import HypothesisFamily, RejectionSet, arm_test, closed_test, holm_stepdown, pool_arms

REPORT_HEADER = (
    "scenario_id", "method", "error_pct", "power_pct", "error_se_pct", "power_se_pct", "reps", "seed",
    "error_count", "power_count", "error", "power", "error_se", "power_se",
)


class DataError(ValueError):
    """Dataset inconsistent with the analysis design."""


def _pct(x: float | None) -> str:
    return "" if x is None else f"{100.0 * x:.1f}"


def _exact(x: float | None) -> str:
    return "" if x is None else f"{x:.10f}"


def report_rows(reports: Iterable[SimulationReport]) -> list[list[str]]:
    rows = []
    for report in reports:
        for r in report.rows:
            oc = r.oc
            rows.append([
                r.scenario_id, r.method,
                _pct(oc.fwer), _pct(oc.power), _pct(oc.fwer_se), _pct(oc.power_se),
                str(r.reps), str(r.seed),
                str(r.error_count) if oc.fwer is not None else "",
                str(r.power_count) if oc.power is not None else "",
                _exact(oc.fwer), _exact(oc.power), _exact(oc.fwer_se), _exact(oc.power_se),
            ])
    return rows


def format_report(reports: Iterable[SimulationReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    writer.writerows(report_rows(reports))
    return buf.getvalue()


def read_report(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- datasets ---------------------------------------------------------------------


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    block: int
    arm: int
    response: float


def read_dataset(path) -> list[PatientRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["patient_id", "block", "arm", "response"]
        if reader.fieldnames != expected:
            raise DataError(f"dataset header must be {','.join(expected)}, got {reader.fieldnames}")
        records = []
        for line, row in enumerate(reader, start=2):
            try:
                records.append(
                    PatientRecord(row["patient_id"], int(row["block"]), int(row["arm"]), float(row["response"]))
                )
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}, line {line}: {exc}") from None
    return records


def write_dataset(path, patients: Iterable[tuple[int, int, float]]) -> None:
    """Write (block, arm, response) triples; responses use round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "block", "arm", "response"])
        for i, (block, arm, response) in enumerate(patients, start=1):
            writer.writerow([i, block, arm, repr(float(response))])


def build_family(
    records: Sequence[PatientRecord], design: AnalysisDesign, method: str = "matching",
    alpha: float | None = None,
) -> HypothesisFamily:
    """Aggregate patient records into per-arm block summaries and check them against the design."""
    K, b = design.K, design.b
    blocks = sorted({r.block for r in records})
    if blocks != list(range(b + 1)):
        raise DataError(f"dataset blocks must be exactly 0..{b}, got {blocks}")
    counts = [[0] * (b + 1) for _ in range(K + 1)]
    sums = [[0.0] * (b + 1) for _ in range(K + 1)]
    for r in records:
        if not 0 <= r.arm <= K:
            raise DataError(f"patient {r.patient_id}: arm {r.arm} outside 0..{K}")
        counts[r.arm][r.block] += 1
        sums[r.arm][r.block] += r.response
    for arm in range(K + 1):
        if counts[arm][0] != design.runin_per_arm:
            raise DataError(
                f"arm {arm}: {counts[arm][0]} run-in patients, design expects {design.runin_per_arm}"
            )
    for k in range(1, b + 1):
        if counts[0][k] != design.ctrl_block_sizes[k - 1]:
            raise DataError(
                f"control block {k}: {counts[0][k]} patients, design expects {design.ctrl_block_sizes[k - 1]}"
            )
        for arm in range(1, K + 1):
            if counts[arm][k] < 1:
                raise DataError(f"arm {arm} has no patients in block {k}")
    ctrl_total = sums[0][0]
    for k in range(1, b + 1):
        ctrl_total += sums[0][k]
    m = design.runin_per_arm + sum(design.ctrl_block_sizes)
    control = ControlSummary(m, ctrl_total / m, design.ctrl_block_sizes)
    data = tuple(
        ObservedArmData(sums[arm][0], tuple(counts[arm][1:]), tuple(sums[arm][1:]))
        for arm in range(1, K + 1)
    )
    return HypothesisFamily(
        design.plans, data, control, design.alpha if alpha is None else alpha,
        method, design.sigma, design.two_sided,
    )


@dataclass(frozen=True)
class ArmAnalysis:
    arm: str
    trace: WeightTrace
    n_total: int
    u_stat: float
    t_tilde: float
    std: float


@dataclass(frozen=True)
class Analysis:
    method: str
    arms: tuple[ArmAnalysis, ...]
    intersections: tuple[ArmAnalysis, ...]
    closed: RejectionSet
    holm: RejectionSet


def _naive_trace(plan, data) -> WeightTrace:
    total = plan.runin_count + sum(data.block_counts)
    counts = (plan.runin_count,) + data.block_counts
    return WeightTrace((float(total),) * len(counts), tuple(c / total for c in counts))


def _arm_analysis(label: str, plan, data, family: HypothesisFamily) -> ArmAnalysis:
    result = arm_test(plan, data, family, family.alpha)
    if family.method == "naive":
        trace = _naive_trace(plan, data)
        n_total = plan.runin_count + sum(data.block_counts)
    else:
        trace = compute_weights(plan, data.block_counts)
        n_total = plan.total
    return ArmAnalysis(label, trace, n_total, result.u_stat, result.t_tilde, result.std)


def analyze(family: HypothesisFamily) -> Analysis:
    arms = tuple(
        _arm_analysis(str(j), family.plans[j - 1], family.data[j - 1], family) for j in range(1, family.K + 1)
    )
    closed = closed_test(family)
    inters = tuple(
        _arm_analysis("+".join(map(str, J)), *pool_arms(J, family), family)
        for J in closed.intersections if len(J) > 1
    )
    holm = holm_stepdown([a.u_stat for a in arms], family.alpha, family.two_sided)
    return Analysis(family.method, arms, inters, closed, holm)


def format_analysis(analysis: Analysis, decisions: bool = True) -> str:
    """Multi-section CSV: weights, statistics, and (optionally) decisions."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm", "block", "w", "u"])
    for a in analysis.arms + analysis.intersections:
        for k, (wk, uk) in enumerate(zip(a.trace.w, a.trace.u)):
            w.writerow([a.arm, k, f"{wk:.12f}", f"{uk:.12f}"])
    w.writerow([])
    w.writerow(["arm", "n_total", "u_sum", "t_tilde", "std", "u_stat"])
    for a in analysis.arms + analysis.intersections:
        w.writerow([a.arm, a.n_total, f"{a.trace.u_sum:.12f}", f"{a.t_tilde:.12f}", f"{a.std:.12f}", f"{a.u_stat:.12f}"])
    if decisions:
        prefix = "new" if analysis.method == "matching" else "naive"
        w.writerow([])
        w.writerow(["procedure", "arm", "rejected"])
        for name, rs in ((f"{prefix}-closed", analysis.closed), (f"{prefix}-holm", analysis.holm)):
            for j, rej in enumerate(rs.rejected, start=1):
                w.writerow([name, j, int(rej)])
    return buf.getvalue()


def analyze_file(dataset, design: AnalysisDesign, method: str = "matching", alpha: float | None = None) -> Analysis:
    return analyze(build_family(read_dataset(Path(dataset)), design, method, alpha))
