import os
import pytest

from experiment_manager import load_config, ExperimentManager
from tools.optimize_trial import optimize_trial, TrialResponse, OptimizeTrialError


@pytest.fixture
def manager():
    """Fixture to provide experiment manager for tests"""
    config_path = os.path.join(os.path.dirname(__file__), "..", "test_config.yaml")
    config = load_config(config_path)
    return ExperimentManager(config)


async def test_optimize_trial_result_structure(manager):
    """Test that a single trial returns its trace and final layout"""
    result = await optimize_trial(manager, "tiny", 0, trial=0)

    assert isinstance(result, TrialResponse)
    assert result.architecture == "single"
    assert result.mobility == "MA"
    assert result.sum_rate == result.trace[-1]
    assert len(result.trace) == result.outer_iterations + 1
    assert len(result.group_refs) == 4
    assert all(len(ref) == 2 for ref in result.group_refs)
    assert "bits/s/Hz" in str(result)


async def test_optimize_trial_fixed_antennas(manager):
    """Test that FA points keep the fixed layout"""
    result = await optimize_trial(manager, "tiny", 3, trial=1)
    assert result.architecture == "group-2"
    assert result.mobility == "FA"
    assert result.group_refs[0][0] == 0.0


async def test_optimize_trial_matches_harness_seed(manager):
    """Test that repeating a trial reproduces it exactly"""
    first = await optimize_trial(manager, "tiny", 2, trial=1)
    second = await optimize_trial(manager, "tiny", 2, trial=1)
    assert first.trace == second.trace
    assert first.group_refs == second.group_refs


async def test_optimize_trial_unknown_point(manager):
    """Test that a missing sweep point raises OptimizeTrialError"""
    with pytest.raises(OptimizeTrialError, match="has no sweep point 42"):
        await optimize_trial(manager, "tiny", 42)


async def test_optimize_trial_unknown_experiment(manager):
    """Test that a missing experiment raises OptimizeTrialError"""
    with pytest.raises(OptimizeTrialError, match="not found"):
        await optimize_trial(manager, "missing", 0)


async def test_optimize_trial_negative_trial(manager):
    """Test that trial indices must be non-negative"""
    with pytest.raises(OptimizeTrialError, match="non-negative"):
        await optimize_trial(manager, "tiny", 0, trial=-1)
