import dataclasses

import numpy as np
import pytest

from blockrar import rng as streams
from blockrar.core import critical_value
from blockrar.engine import (
    Scenario,
    apply_methods,
    arm_stats,
    estimate_oc,
    oc_from_counts,
    run_replications,
    simulate_batch,
    simulate_trial,
)
from blockrar.multiplicity import HypothesisFamily, RejectionSet, closed_test, holm_stepdown


def scen(**kw):
    base = dict(K=2, deltas=(0.0, 0.5), scheme="bar", reps=2000, seed=17)
    base.update(kw)
    return Scenario(**base)


def batch_for(s, reps=None):
    return simulate_batch(s, streams.ReplicationStream(s.seed, np.arange(reps or s.reps)))


def test_scenario_validation():
    with pytest.raises(ValueError, match="deltas"):
        scen(deltas=(0.0,))
    with pytest.raises(ValueError, match="scheme"):
        scen(scheme="thompson")
    with pytest.raises(ValueError, match="methods"):
        scen(methods=("new-closed", "new-closed"))
    with pytest.raises(ValueError, match="spending"):
        scen(spending=(0.03, 0.03, 0.03))
    with pytest.raises(ValueError, match="sigma"):
        scen(sigma=0.0)
    assert scen(spending=(0.05 / 3,) * 3).report_methods()[-2:] == ("new-closed-spending", "new-holm-spending")


def test_same_seed_same_report():
    s = scen(reps=3000)
    assert run_replications(s) == run_replications(s)
    assert run_replications(s) != run_replications(dataclasses.replace(s, seed=18))


def test_chunking_does_not_matter():
    s = scen(reps=1200, scheme="inflator", K=3, deltas=(0.0, 0.5, 1.0))
    assert run_replications(s, chunk_size=1200) == run_replications(s, chunk_size=7)


def test_workers_do_not_matter():
    s = scen(reps=4000)
    one = run_replications(s, workers=1, chunk_size=500)
    assert run_replications(s, workers=8, chunk_size=500) == one


@pytest.mark.parametrize("scheme", ["bar", "inflator", "fixed"])
def test_sample_sizes(scheme):
    s = scen(scheme=scheme, K=3, deltas=(0.0, 0.25, 0.5), reps=500)
    b = batch_for(s)
    assert np.all(b.observed.sum(axis=1) == s.exp_block_size)
    assert np.all(b.planned.sum(axis=1) == s.exp_block_size)
    assert b.observed.min() >= 1 and b.planned.min() >= 1
    assert s.control_total == 65


def test_inflator_accounting_when_always_crossed():
    # with a huge effect on arm 1 the threshold is crossed after the run-in
    s = scen(scheme="inflator", deltas=(50.0, 0.0), reps=200)
    b = batch_for(s)
    totals = s.runin_per_arm + b.observed.sum(axis=2)
    assert np.all(totals.sum(axis=1) == 130)
    assert np.all(totals[:, 0] == 8)
    assert np.all(totals[:, 1] == 122)


def test_inflator_below_threshold_feeds_arm_one():
    s = scen(scheme="inflator", deltas=(-50.0, 0.0), reps=200)
    b = batch_for(s)
    assert np.all(b.observed[:, 0, :] == 39)


def test_tiny_sigma():
    # responses are standardized by the known sigma, so the statistics do not move
    unit = scen(deltas=(0.0, 0.0), reps=300)
    tiny = dataclasses.replace(unit, sigma=1e-8)
    b_unit, b_tiny = batch_for(unit), batch_for(tiny)
    for method in ("matching", "naive"):
        assert np.allclose(arm_stats(tiny, b_tiny, method), arm_stats(unit, b_unit, method), atol=1e-6)
    # on the unit scale the same data give statistics of order sigma
    on_unit_scale = arm_stats(unit, b_tiny, "matching")
    assert np.abs(on_unit_scale).max() < 1e-6
    assert not (on_unit_scale >= critical_value(0.05)).any()


def test_trial_matches_scalar_analysis():
    s = scen(K=3, deltas=(0.0, 0.4, 0.8), scheme="inflator")
    for r in range(20):
        trial = simulate_trial(s, streams.ReplicationStream(s.seed, [r]))
        for method, kind in (("new", "matching"), ("naive", "naive")):
            fam = HypothesisFamily(trial.plans, trial.data, trial.control, s.alpha, kind)
            assert trial.rejections[f"{method}-closed"] == closed_test(fam)
            stats = [closed_test(fam).intersections[(j,)].u_stat for j in (1, 2, 3)]
            assert trial.rejections[f"{method}-holm"] == holm_stepdown(stats, s.alpha)


def test_batch_stats_match_trial_stats():
    s = scen(K=2, reps=5)
    batch = batch_for(s)
    stats = arm_stats(s, batch, "matching")
    for r in range(5):
        trial = simulate_trial(s, streams.ReplicationStream(s.seed, [r]))
        fam = HypothesisFamily(trial.plans, trial.data, trial.control)
        res = closed_test(fam)
        assert [res.intersections[(j,)].u_stat for j in (1, 2)] == stats[r].tolist()


def test_simulate_trial_needs_one_rep():
    with pytest.raises(ValueError):
        simulate_trial(scen(), streams.ReplicationStream(1, [0, 1]))


def test_estimate_oc_examples():
    rej = np.zeros((10_000, 2), dtype=bool)
    rej[:500, 0] = True
    rej[:9000, 1] = True
    oc = estimate_oc(rej, (0.0, 0.5))
    assert oc.fwer == pytest.approx(0.05)
    assert oc.fwer_se == pytest.approx(0.00218, abs=1e-5)
    assert oc.power == pytest.approx(0.9)
    sets = [RejectionSet((bool(a), bool(b))) for a, b in rej[:100]]
    assert estimate_oc(sets, (0.0, 0.5)).fwer == 1.0
    assert estimate_oc(rej, (0.0, 0.0)).power is None
    assert estimate_oc(rej, (0.5, 0.5)).fwer is None


def test_mc_se_halves_with_four_times_reps():
    a = oc_from_counts(500, 0, 10_000, (0.0,))
    b = oc_from_counts(2000, 0, 40_000, (0.0,))
    assert b.fwer_se == pytest.approx(a.fwer_se / 2)


def test_spending_is_at_least_as_strict_at_final_block():
    s = scen(deltas=(0.0, 0.0), spending=(0.05 / 3,) * 3, reps=3000)
    out = apply_methods(s, batch_for(s))
    assert set(out) == {"naive-closed", "new-closed", "naive-holm", "new-holm", "new-closed-spending", "new-holm-spending"}
    for name in ("new-closed", "new-holm"):
        assert out[name + "-spending"].mean() < out[name].mean() + 0.02


def test_single_arm_rejection_rate_matches_statistic():
    s = scen(K=1, deltas=(0.3,), scheme="fixed", reps=1000)
    b = batch_for(s)
    stats = arm_stats(s, b, "matching")[:, 0]
    out = apply_methods(s, b)
    assert np.array_equal(out["new-closed"][:, 0], stats >= critical_value(0.05))
    assert np.array_equal(out["new-holm"][:, 0], out["new-closed"][:, 0])
