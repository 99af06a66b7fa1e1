import asyncio
from typing import List
from pydantic import BaseModel
from experiment_manager import (
    ConfigurationError,
    ExperimentManager,
    ExperimentNotFoundError,
)
from fp_solver import OptimizationError
from sim_harness import solve_trial


class OptimizeTrialError(Exception):
    pass


class TrialResponse(BaseModel):
    experiment: str
    point_id: int
    trial: int
    architecture: str
    mobility: str
    sum_rate: float
    trace: List[float]
    outer_iterations: int
    converged: bool
    admm_residual: float
    group_refs: List[List[float]]
    flags: List[str]

    def __str__(self) -> str:
        status = "converged" if self.converged else "stopped"
        result = (
            f"Point {self.point_id} trial {self.trial} ({self.architecture}, {self.mobility}): "
            f"{self.sum_rate:.4f} bits/s/Hz, {status} after {self.outer_iterations} iterations"
        )
        if self.flags:
            result += f"\nFlags: {', '.join(self.flags)}"
        return result


async def optimize_trial(
    manager: ExperimentManager, experiment: str, point_id: int, trial: int = 0
) -> TrialResponse:
    """Run the joint optimization for one sweep point and trial"""
    try:
        spec = manager.get_experiment(experiment)
    except ExperimentNotFoundError as e:
        raise OptimizeTrialError(str(e)) from e

    if trial < 0:
        raise OptimizeTrialError("Trial index must be non-negative")

    point = next((p for p in spec.sweep_points() if p.point_id == point_id), None)
    if point is None:
        raise OptimizeTrialError(
            f"Experiment '{experiment}' has no sweep point {point_id}"
        )

    loop = asyncio.get_event_loop()
    try:
        result = await loop.run_in_executor(None, solve_trial, spec, point, trial)
    except (OptimizationError, ConfigurationError) as e:
        raise OptimizeTrialError(
            f"Optimization of point {point_id} trial {trial} failed: {str(e)}"
        ) from e

    return TrialResponse(
        experiment=experiment,
        point_id=point_id,
        trial=trial,
        architecture=point.architecture,
        mobility=point.mobility,
        sum_rate=result.sum_rate,
        trace=result.trace,
        outer_iterations=result.outer_iterations,
        converged=result.converged,
        admm_residual=result.admm_residual,
        group_refs=result.geometry.group_refs.tolist(),
        flags=result.flags,
    )
