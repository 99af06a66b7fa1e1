import asyncio
import time
from typing import List
from pydantic import BaseModel
import sim_harness
from experiment_manager import (
    ConfigurationError,
    ExperimentManager,
    ExperimentNotFoundError,
)
from results_io import emit


class RunExperimentError(Exception):
    pass


class RunResponse(BaseModel):
    experiment: str
    rows: int
    failed_trials: int
    output_dir: str
    files: List[str]
    elapsed_s: float

    def __str__(self) -> str:
        lines = [
            f"Experiment '{self.experiment}': {self.rows} trials "
            f"({self.failed_trials} failed) in {self.elapsed_s:.1f}s",
            f"Results in {self.output_dir}:",
        ]
        lines.extend(f"  {path}" for path in self.files)
        return "\n".join(lines)


async def run_experiment(
    manager: ExperimentManager,
    experiment: str,
    trials: int | None = None,
    seed: int | None = None,
    output_dir: str | None = None,
    threads: int | None = None,
) -> RunResponse:
    """Run an experiment sweep and write its result files"""
    try:
        spec = manager.resolve(experiment, trials=trials, seed=seed, output_dir=output_dir)
    except (ExperimentNotFoundError, ConfigurationError) as e:
        raise RunExperimentError(f"Cannot run experiment '{experiment}': {e}") from e

    workers = threads if threads is not None else manager.config.settings.threads
    if workers < 1:
        raise RunExperimentError("threads must be at least 1")

    loop = asyncio.get_event_loop()

    def _run_sync():
        start = time.perf_counter()
        rows = sim_harness.run_experiment(spec, workers)
        files = emit(rows, spec.output_dir, spec=spec, experiment_name=experiment)
        return rows, files, time.perf_counter() - start

    try:
        rows, files, elapsed = await loop.run_in_executor(None, _run_sync)
    except Exception as e:
        raise RunExperimentError(f"Experiment '{experiment}' failed: {str(e)}") from e

    return RunResponse(
        experiment=experiment,
        rows=len(rows),
        failed_trials=sum(row.failed for row in rows),
        output_dir=spec.output_dir,
        files=files,
        elapsed_s=elapsed,
    )
