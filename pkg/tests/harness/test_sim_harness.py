import math
import os
import numpy as np
import pytest

import sim_harness
from experiment_manager import ExperimentManager, load_config
from sim_harness import (
    ResultRow,
    check_trends,
    derive_seed,
    run_experiment,
    run_trial,
    solve_trial,
    summarize,
)


@pytest.fixture
def manager():
    """Fixture to provide the experiment manager for tests"""
    config_path = os.path.join(os.path.dirname(__file__), "..", "test_config.yaml")
    return ExperimentManager(load_config(config_path))


def make_row(point_id, rate, architecture=(4, 1), mobility="MA", trial=0, flags=None):
    num_groups, group_size = architecture
    return ResultRow(
        point_id=point_id,
        M=num_groups * group_size,
        N_G=num_groups,
        N_E=group_size,
        N_t=2,
        L=2,
        l_s=1.5,
        mobility=mobility,
        P_dBm=10.0,
        trial=trial,
        sum_rate_bps_hz=rate,
        outer_iters=3,
        admm_resid=1e-6,
        wall_ms=12.0,
        flags=flags or [],
    )


def test_derive_seed_is_stable():
    """Test that seeds depend only on (base_seed, key, trial)"""
    assert derive_seed(7, 0, 1) == derive_seed(7, 0, 1)
    assert derive_seed(7, 0, 1) != derive_seed(7, 0, 2)
    assert derive_seed(7, 0, 1) != derive_seed(7, 1, 1)
    assert derive_seed(7, 0, 1) != derive_seed(8, 0, 1)
    assert 0 <= derive_seed(7, 0, 1) < 2**64


def test_zero_trials_gives_no_rows(manager):
    """Test that trials = 0 yields an empty table and summary"""
    spec = manager.resolve("tiny", trials=0)
    rows = run_experiment(spec)
    assert rows == []
    summary = summarize(rows)
    assert summary.points == []
    assert summary.gaps == []


def test_run_experiment_is_deterministic(manager):
    """Test that two runs agree on everything except wall time"""
    spec = manager.resolve("tiny", trials=1)
    first = run_experiment(spec)
    second = run_experiment(spec)

    assert len(first) == 4
    assert [row.point_id for row in first] == [0, 1, 2, 3]
    for a, b in zip(first, second):
        assert a.deterministic_fields() == b.deterministic_fields()
        assert not a.failed
        assert a.sum_rate_bps_hz >= 0.0


def test_worker_pool_matches_serial_run(manager):
    """Test that parallel workers reproduce the serial rows"""
    spec = manager.resolve("tiny", trials=1)
    serial = run_experiment(spec, threads=1)
    parallel = run_experiment(spec, threads=2)
    assert [row.deterministic_fields() for row in serial] == [
        row.deterministic_fields() for row in parallel
    ]


def test_scenario_draws_are_shared(manager):
    """Test that architectures and mobility modes see the same users and paths"""
    spec = manager.get_experiment("tiny")
    points = list(spec.sweep_points())
    results = [solve_trial(spec, point, 1) for point in points]

    reference = results[0].geometry.ue_positions
    for result in results[1:]:
        assert np.array_equal(result.geometry.ue_positions, reference)


def test_mobility_modes_are_paired(manager):
    """Test that MA and FA share the initial sum-rate of a trial"""
    spec = manager.get_experiment("tiny")
    points = [p for p in spec.sweep_points() if p.architecture == "single"]
    movable, fixed = (solve_trial(spec, point, 0) for point in points)
    assert movable.trace[0] == pytest.approx(fixed.trace[0], rel=1e-12)


def test_run_trial_records_failures(manager, monkeypatch):
    """Test that an exception becomes an error flag instead of aborting"""

    def explode(spec, point, trial):
        raise RuntimeError("boom")

    monkeypatch.setattr(sim_harness, "solve_trial", explode)
    spec = manager.get_experiment("tiny")
    point = next(spec.sweep_points())
    row = run_trial(spec, point, 0)

    assert row.flags == ["error:RuntimeError"]
    assert row.failed
    assert math.isnan(row.sum_rate_bps_hz)
    assert row.outer_iters == 0


def test_row_architecture_label():
    """Test the architecture label derived from N_G and N_E"""
    assert make_row(0, 1.0, (4, 1)).architecture == "single"
    assert make_row(0, 1.0, (2, 2)).architecture == "group-2"
    assert make_row(0, 1.0, (1, 4)).architecture == "fully"


def test_summarize_single_row():
    """Test that one trial gives zero spread and a degenerate interval"""
    summary = summarize([make_row(0, 3.0)])
    point = summary.points[0]
    assert point.mean == 3.0
    assert point.std == 0.0
    assert point.ci_low == point.ci_high == 3.0


def test_summarize_statistics():
    """Test sample std and the 95% normal interval"""
    rows = [make_row(0, rate, trial=t) for t, rate in enumerate([1.0, 2.0, 3.0, 4.0])]
    point = summarize(rows).points[0]
    std = np.std([1.0, 2.0, 3.0, 4.0], ddof=1)
    assert point.mean == pytest.approx(2.5)
    assert point.std == pytest.approx(std)
    assert point.ci_high - point.mean == pytest.approx(1.959963984540054 * std / 2.0)
    assert point.trials == 4
    assert point.failures == 0


def test_summarize_skips_failed_trials():
    """Test that error rows count as failures and not in the mean"""
    rows = [
        make_row(0, 2.0, trial=0),
        make_row(0, float("nan"), trial=1, flags=["error:ValueError"]),
    ]
    point = summarize(rows).points[0]
    assert point.mean == 2.0
    assert point.failures == 1
    assert point.trials == 2


def test_summarize_gaps():
    """Test MA-FA and architecture-over-single gaps"""
    rows = [
        make_row(0, 3.0, (4, 1), "MA"),
        make_row(1, 2.0, (4, 1), "FA"),
        make_row(2, 4.0, (2, 2), "MA"),
        make_row(3, 2.5, (2, 2), "FA"),
    ]
    summary = summarize(rows)
    assert summary.mobility_gap("single", 4) == pytest.approx(1.0)
    assert summary.mobility_gap("group-2", 4) == pytest.approx(1.5)
    assert summary.connectivity_gap("group-2", 4) == pytest.approx(1.0)
    assert summary.connectivity_gap("group-2", 4, mobility="FA") == pytest.approx(0.5)
    assert summary.connectivity_gap("single", 4) is None
    assert summary.mobility_gap("fully", 4) is None


def test_equal_rows_have_zero_gaps():
    """Test that identical rates give zero gaps everywhere"""
    rows = [
        make_row(0, 2.0, (4, 1), "MA"),
        make_row(1, 2.0, (4, 1), "FA"),
        make_row(2, 2.0, (1, 4), "MA"),
        make_row(3, 2.0, (1, 4), "FA"),
    ]
    summary = summarize(rows)
    assert len(summary.gaps) == 4
    assert all(gap.gap == 0.0 for gap in summary.gaps)


def trend_rows(single_ma_large=5.0):
    # M = 4 and M = 16, single- and fully-connected, MA and FA
    rates = [
        ((4, 1), "MA", 3.0),
        ((4, 1), "FA", 2.0),
        ((1, 4), "MA", 3.5),
        ((1, 4), "FA", 2.8),
        ((16, 1), "MA", single_ma_large),
        ((16, 1), "FA", 4.5),
        ((2, 8), "MA", 5.8),
        ((2, 8), "FA", 5.5),
        ((1, 16), "MA", 6.5),
        ((1, 16), "FA", 6.2),
    ]
    return [
        make_row(point_id, rate, architecture, mobility)
        for point_id, (architecture, mobility, rate) in enumerate(rates)
    ]


def test_trends_hold_on_ordered_means():
    """Test that a sweep with the expected orderings passes every trend check"""
    checks = {check.name: check for check in check_trends(summarize(trend_rows()))}
    assert set(checks) == {
        "connectivity_order",
        "movability_gain",
        "movability_gain_shrinks",
        "connectivity_gain_grows",
    }
    assert all(check.holds for check in checks.values())
    assert "M=16" in checks["connectivity_order"].detail


def test_trends_flag_a_violation():
    """Test that MA below FA breaks only the movability check"""
    checks = {
        check.name: check.holds
        for check in check_trends(summarize(trend_rows(single_ma_large=4.0)))
    }
    assert checks["movability_gain"] is False
    assert checks["connectivity_order"] is True
    assert checks["movability_gain_shrinks"] is True
    assert checks["connectivity_gain_grows"] is True


def test_trends_need_enough_points():
    """Test that a single point leaves every trend undecided"""
    checks = check_trends(summarize([make_row(0, 3.0)]))
    assert [check.holds for check in checks] == [None, None, None, None]
    assert "not enough points" in str(checks[0])
