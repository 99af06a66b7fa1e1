import os
import pytest

from experiment_manager import load_config, ExperimentManager
from tools.list_experiments import list_experiments


@pytest.fixture
def manager():
    """Fixture to provide experiment manager for tests"""
    config_path = os.path.join(os.path.dirname(__file__), "..", "test_config.yaml")
    config = load_config(config_path)
    return ExperimentManager(config)


def test_list_experiments_structure(manager):
    """Test that every configured experiment is listed with its size"""
    result = list_experiments(manager)

    assert [entry["name"] for entry in result] == ["tiny", "fixed_only"]
    tiny = result[0]
    assert tiny["description"] == "Two-trial smoke sweep"
    assert tiny["sweep_points"] == 4
    assert tiny["trials"] == 2
    assert tiny["output_dir"] == "results/tiny"


def test_list_experiments_defaults(manager):
    """Test that unset fields fall back to defaults"""
    fixed_only = list_experiments(manager)[1]
    assert fixed_only["sweep_points"] == 1
    assert fixed_only["output_dir"] == "results"
