"""Variance-matching reweighted tests for block response-adaptive trials."""
from .core import (
    AdaptiveTestResult,
    AuxiliaryArmPlan,
    ControlSummary,
    ObservedArmData,
    SpendingSchedule,
    WeightTrace,
    adaptive_statistic,
    analyze_at_block,
    compute_weights,
    finalize_test,
    matching_test,
    naive_z,
)
from .engine import Scenario, SimulationReport, run_replications, simulate_trial
from .multiplicity import HypothesisFamily, RejectionSet, closed_test, holm_stepdown, pool_arms

__version__ = "0.1.0"

__all__ = [
    "AdaptiveTestResult", "AuxiliaryArmPlan", "ControlSummary", "HypothesisFamily", "ObservedArmData",
    "RejectionSet", "Scenario", "SimulationReport", "SpendingSchedule", "WeightTrace",
    "adaptive_statistic", "analyze_at_block", "closed_test", "compute_weights", "finalize_test",
    "holm_stepdown", "matching_test", "naive_z", "pool_arms", "run_replications", "simulate_trial",
]
