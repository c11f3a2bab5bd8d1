"""Test-period sweep: feasibility window, best period, threshold schedule."""

from __future__ import annotations

import numpy as np
import pytest

from aloha_intervention import (
    SystemParams,
    efficiency_loss,
    kbar_schedule,
    sweep,
)

from conftest import TAU_STAR_18


def test_feasibility_window(ref_sweep):
    feasible = {t for t, outcome in ref_sweep.rows if outcome.feasible}
    assert feasible == set(range(2, 21))


def test_best_period_and_throughput(ref_sweep):
    assert ref_sweep.best_t == 18
    assert 0.365 <= ref_sweep.best_throughput <= 0.375
    assert ref_sweep.best_throughput == pytest.approx(TAU_STAR_18, abs=1e-12)


def test_coop_reference(ref_sweep):
    assert ref_sweep.coop_reference == pytest.approx(5 * 0.08192, abs=1e-15)
    assert ref_sweep.coop_reference == pytest.approx(0.4096, abs=1e-12)


def test_threshold_schedule(ref_sweep):
    schedule = dict(kbar_schedule(ref_sweep))
    expected = {}
    expected.update({t: 1 for t in range(2, 8)})
    expected.update({t: 2 for t in range(8, 14)})
    expected.update({t: 3 for t in range(14, 19)})
    expected.update({t: 4 for t in (19, 20)})
    assert schedule == expected


def test_threshold_schedule_nondecreasing(ref_sweep):
    values = [kbar for _, kbar in kbar_schedule(ref_sweep)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_efficiency_loss(ref_sweep):
    loss = efficiency_loss(ref_sweep)
    assert loss >= 0.0
    assert loss == pytest.approx(0.4096 - TAU_STAR_18, abs=1e-12)
    # coarse published anchor: about 0.41 - 0.37
    assert loss == pytest.approx(0.04, abs=0.005)


def test_feasible_throughputs_bounded_by_cooperation(ref_sweep):
    for _, outcome in ref_sweep.rows:
        if outcome.feasible:
            assert 0.0 < outcome.optimal_throughput <= ref_sweep.coop_reference


def test_infeasible_rows_carry_fallback_and_slack(ref_sweep):
    for t, outcome in ref_sweep.rows:
        if not outcome.feasible:
            assert outcome.optimal_throughput == pytest.approx(0.0064, abs=1e-12)
            assert outcome.feasibility_slack < 0.0
            assert outcome.rule is None


def test_curve_is_non_monotonic(ref_sweep):
    taus = [
        outcome.optimal_throughput
        for _, outcome in ref_sweep.rows
        if outcome.feasible
    ]
    diffs = np.diff(taus)
    assert np.any(diffs > 0) and np.any(diffs < 0)


def test_sweep_is_deterministic(ref_params):
    first = sweep(ref_params)
    second = sweep(ref_params)
    assert first.best_t == second.best_t
    assert first.best_throughput == second.best_throughput
    for (t1, a), (t2, b) in zip(first.rows, second.rows):
        assert t1 == t2
        assert a.optimal_throughput == b.optimal_throughput
        assert a.feasibility_slack == b.feasibility_slack
        if a.rule is not None:
            assert np.array_equal(a.rule.levels, b.rule.levels)


def test_all_infeasible_sweep():
    result = sweep(SystemParams(5, 0.2, 0.8, 2))
    assert result.best_t is None and result.best_throughput is None
    assert kbar_schedule(result) == ()
    assert all(not outcome.feasible for _, outcome in result.rows)
    with pytest.raises(ValueError):
        efficiency_loss(result)


def test_single_slot_horizon_is_infeasible():
    result = sweep(SystemParams(5, 0.2, 0.8, 1))
    assert len(result.rows) == 1
    assert not result.rows[0][1].feasible
