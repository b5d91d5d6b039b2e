import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockrar.core import (
    AuxiliaryArmPlan,
    ControlSummary,
    ObservedArmData,
    SpendingSchedule,
    adaptive_statistic,
    analyze_at_block,
    compute_weights,
    critical_value,
    finalize_test,
    matching_statistic,
    matching_test,
    naive_statistic,
    naive_z,
    weight_recursion,
)

# Frozen from a 40-digit mpmath evaluation that solves the matching condition
# (ñ_k + n_(k+1)) / w_k² = n_(k) / w_{k-1}² block by block.
HAND_W = (10.0, 11.1803398874989, 7.90569415042095)
HAND_U = (0.2, 0.53665631459995, 0.25298221281347)
HAND_USUM = 0.98963852741342
HAND_T = 0.34183705089324
HAND_TSTAR = 0.242873198151898
HAND_STD = 0.54394566179739
HAND_U_STAT = 0.44650268438461
TRUNC_U = (1 / 3, 0.816496580927726)
TRUNC_USUM = 1.14982991426106
TRUNC_T = 0.741581623797196
TRUNC_STD = 0.779339214063127
TRUNC_U_STAT = 0.804012708540977
Z95 = 1.64485362695147


@pytest.fixture
def hand():
    plan = AuxiliaryArmPlan(2, (4, 4))
    data = ObservedArmData(2.0, (6, 2), (3.0, -1.0))  # means 1.0, 0.5, -0.5
    return plan, data


def test_plan_bookkeeping():
    plan = AuxiliaryArmPlan(5, (3, 4, 6))
    assert plan.total == 18
    assert plan.tail_sums == (13, 10, 6, 0)
    assert plan.b == 3


@pytest.mark.parametrize(
    "runin, blocks", [(0, (4,)), (2, ()), (2, (4, 0)), (2, (1.5,))]
)
def test_plan_rejects_bad_counts(runin, blocks):
    with pytest.raises(ValueError):
        AuxiliaryArmPlan(runin, blocks)


def test_identity_weights():
    trace = compute_weights(AuxiliaryArmPlan(5, (4, 4)), (4, 4))
    assert trace.w == (13.0, 13.0, 13.0)
    assert trace.u == pytest.approx((5 / 13, 4 / 13, 4 / 13), abs=1e-15)
    assert trace.u_sum == pytest.approx(1.0, abs=1e-15)


def test_hand_weights(hand):
    plan, data = hand
    trace = compute_weights(plan, data.block_counts)
    assert trace.w == pytest.approx(HAND_W, abs=1e-12)
    assert trace.u == pytest.approx(HAND_U, abs=1e-12)
    var = sum(n / w**2 for n, w in zip((2, 6, 2), trace.w))
    assert var == pytest.approx(0.1, abs=1e-15)
    # matching after block 1: (ñ_1 + n_(2)) / w_1² = n_(1) / n²
    assert (6 + 4) / trace.w[1] ** 2 == pytest.approx(8 / 100, abs=1e-15)


@pytest.mark.parametrize(
    "observed", [(4,), (4, 4, 4), (0, 4), (4, -1)]
)
def test_compute_weights_errors(observed):
    with pytest.raises(ValueError):
        compute_weights(AuxiliaryArmPlan(2, (4, 4)), observed)


def test_adaptive_statistic(hand):
    plan, data = hand
    trace = compute_weights(plan, data.block_counts)
    assert adaptive_statistic(trace, data, plan.runin_count) == pytest.approx(HAND_T, abs=1e-12)
    zero = ObservedArmData(0.0, (6, 2), (0.0, 0.0))
    assert adaptive_statistic(trace, zero, 2) == 0.0


def test_adaptive_statistic_constant_mean():
    plan = AuxiliaryArmPlan(3, (5, 7))
    data = ObservedArmData(3 * 0.7, (5, 7), (5 * 0.7, 7 * 0.7))
    trace = compute_weights(plan, data.block_counts)
    assert adaptive_statistic(trace, data, 3) == pytest.approx(0.7, abs=1e-14)


def test_finalize_hand(hand):
    plan, data = hand
    trace = compute_weights(plan, data.block_counts)
    res = finalize_test(HAND_T, trace, ControlSummary(5, 0.1), sigma=1.0, alpha=0.05)
    assert trace.u_sum == pytest.approx(HAND_USUM, abs=1e-12)
    assert res.t_star == pytest.approx(HAND_TSTAR, abs=1e-12)
    assert res.std == pytest.approx(HAND_STD, abs=1e-12)
    assert res.u_stat == pytest.approx(HAND_U_STAT, abs=1e-11)
    assert not res.rejected


def test_finalize_zero(hand):
    plan, data = hand
    trace = compute_weights(plan, data.block_counts)
    res = finalize_test(0.0, trace, ControlSummary(5, 0.0))
    assert res.u_stat == 0.0 and not res.rejected


def test_threshold():
    assert critical_value(0.05) == pytest.approx(Z95, abs=1e-12)
    trace = compute_weights(AuxiliaryArmPlan(5, (4, 4)), (4, 4))
    # std = sqrt(1/13 + 1/m); choose t_tilde so that u_stat hits the targets exactly
    ctrl = ControlSummary(13, 0.0)
    std = math.sqrt(2 / 13)
    assert finalize_test(1.6449 * std, trace, ctrl).rejected
    assert not finalize_test(1.6448 * std, trace, ctrl).rejected


def test_control_count_must_be_positive():
    with pytest.raises(ValueError):
        ControlSummary(0, 0.0)


def test_naive_z():
    ctrl = ControlSummary(65, 0.1)
    assert naive_z(65, 0.1, ctrl).u_stat == 0.0
    u = naive_z(65, 0.6, ctrl).u_stat
    assert u == pytest.approx(2.85043856274784, abs=1e-11)
    assert naive_z(65, 0.6, ctrl, sigma=2.0).u_stat == pytest.approx(u / 2, abs=1e-14)
    with pytest.raises(ValueError):
        naive_z(0, 0.6, ctrl)


def test_analyze_at_block_truncated(hand):
    plan, data = hand
    sched = SpendingSchedule((0.025, 0.025), 0.05)
    res = analyze_at_block(plan, data, 1, ControlSummary(3, 0.1), sched)
    trace = compute_weights(plan.truncate(1), (6,))
    assert trace.w == pytest.approx((6.0, 7.348469228349534), abs=1e-12)
    assert trace.u == pytest.approx(TRUNC_U, abs=1e-12)
    assert trace.u_sum == pytest.approx(TRUNC_USUM, abs=1e-12)
    assert res.t_tilde == pytest.approx(TRUNC_T, abs=1e-12)
    assert res.std == pytest.approx(TRUNC_STD, abs=1e-12)
    assert res.u_stat == pytest.approx(TRUNC_U_STAT, abs=1e-11)
    assert res.alpha == 0.025


def test_analyze_at_last_block_equals_final(hand):
    plan, data = hand
    ctrl = ControlSummary(5, 0.1)
    final = matching_test(plan, data, ctrl, alpha=0.05)[1]
    interim = analyze_at_block(plan, data, 2, ctrl, SpendingSchedule((0.05 / 2, 0.05 / 2), 0.05))
    assert interim.u_stat == final.u_stat
    assert interim.t_star == final.t_star
    assert interim.std == final.std
    full = analyze_at_block(plan, data, 2, ctrl, SpendingSchedule((1e-9, 0.05 - 1e-9), 0.05))
    assert full.rejected == final.rejected


def test_analyze_at_block_zero_responses(hand):
    plan, _ = hand
    data = ObservedArmData(0.0, (6, 2), (0.0, 0.0))
    sched = SpendingSchedule.bonferroni(0.05, 2)
    for F in (1, 2):
        assert analyze_at_block(plan, data, F, ControlSummary(3, 0.0), sched).u_stat == 0.0


def test_analyze_at_block_errors(hand):
    plan, data = hand
    ctrl = ControlSummary(3, 0.0)
    with pytest.raises(ValueError):
        analyze_at_block(plan, data, 3, ctrl, SpendingSchedule.bonferroni(0.05, 2))
    with pytest.raises(ValueError):
        analyze_at_block(plan, data, 0, ctrl, SpendingSchedule.bonferroni(0.05, 2))
    with pytest.raises(ValueError):
        SpendingSchedule((0.03, 0.03), 0.05)
    with pytest.raises(TypeError):
        analyze_at_block(plan, data, 1, ctrl, 0.025)


# -- properties ---------------------------------------------------------------------


@st.composite
def instances(draw, max_b=6, max_count=200):
    b = draw(st.integers(1, max_b))
    runin = draw(st.integers(1, max_count))
    planned = draw(st.lists(st.integers(1, max_count), min_size=b, max_size=b))
    observed = draw(st.lists(st.integers(1, max_count), min_size=b, max_size=b))
    return runin, planned, observed


@given(instances())
@settings(max_examples=500)
def test_variance_identity_and_positivity(inst):
    runin, planned, observed = inst
    trace = compute_weights(AuxiliaryArmPlan(runin, planned), observed)
    n = runin + sum(planned)
    assert trace.w[0] == n
    assert min(trace.w) > 0 and min(trace.u) > 0
    var = sum(c / w**2 for c, w in zip([runin] + observed, trace.w))
    assert abs(var - 1 / n) <= 1e-12


@given(instances(), st.floats(-5, 5), st.floats(-1e3, 1e3))
def test_shift_invariance(inst, base, shift):
    runin, planned, observed = inst
    rng = np.random.default_rng(abs(hash((runin, tuple(planned)))) % 2**32)
    means = base + rng.normal(size=len(planned) + 2)

    def stat(c):
        data = ObservedArmData(runin * (means[0] + c), observed, [n * (m + c) for n, m in zip(observed, means[1:])])
        return matching_test(AuxiliaryArmPlan(runin, planned), data, ControlSummary(30, means[-1] + c))[1].u_stat

    assert stat(shift) == pytest.approx(stat(0.0), abs=1e-10 * max(1.0, abs(shift)))


@given(st.integers(1, 50), st.lists(st.integers(1, 60), min_size=1, max_size=6), st.integers(1, 100))
def test_identity_design_is_pooled_z(runin, planned, m):
    rng = np.random.default_rng(runin * 1000 + m)
    sums = rng.normal(size=len(planned)) * np.sqrt(planned)
    runin_sum = float(rng.normal() * np.sqrt(runin))
    zbar = float(rng.normal() / np.sqrt(m))
    data = ObservedArmData(runin_sum, planned, sums)
    plan = AuxiliaryArmPlan(runin, planned)
    new = matching_test(plan, data, ControlSummary(m, zbar))[1]
    count = runin + sum(planned)
    naive = naive_z(count, (runin_sum + sums.sum()) / count, ControlSummary(m, zbar))
    assert new.u_stat == pytest.approx(naive.u_stat, abs=1e-10)


@given(instances(max_b=4, max_count=50))
def test_kernel_matches_scalar_front_end(inst):
    runin, planned, observed = inst
    rng = np.random.default_rng(len(planned))
    sums = rng.normal(size=len(planned))
    data = ObservedArmData(0.3, observed, sums)
    scalar = matching_test(AuxiliaryArmPlan(runin, planned), data, ControlSummary(17, 0.2))[1]
    batch = matching_statistic(
        np.full(3, runin), np.tile(planned, (3, 1)), np.tile(observed, (3, 1)),
        np.full(3, 0.3), np.tile(sums, (3, 1)), 17, 0.2,
    )
    assert np.all(batch.u_stat == scalar.u_stat)
    assert np.all(batch.std == scalar.std)


def test_weight_recursion_broadcasts():
    res = weight_recursion([2, 5], [[4, 4], [4, 4]], [[6, 2], [4, 4]])
    assert res.w[0] == pytest.approx(HAND_W, abs=1e-12)
    assert np.all(res.w[1] == 13.0)
    assert res.total.tolist() == [10.0, 13.0]


def test_naive_statistic_vectorized():
    out = naive_statistic(np.array([65, 65]), np.array([0.5, 0.0]), 65, 0.0)
    assert out[0] == pytest.approx(2.85043856274784, abs=1e-11)
    assert out[1] == 0.0
