from typing import Any, Dict, List
from experiment_manager import ExperimentManager


def list_experiments(manager: ExperimentManager) -> List[Dict[str, Any]]:
    """List all configured experiments"""
    result = []
    for name, spec in manager.config.experiments.items():
        result.append(
            {
                "name": name,
                "description": spec.description,
                "sweep_points": len(list(spec.sweep_points())),
                "trials": spec.trials,
                "output_dir": spec.output_dir,
            }
        )
    return result
