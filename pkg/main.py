"""
BD-RIS Placement Optimizer MCP Server
A FastMCP server for running the joint beamforming, scattering-matrix and
movable sub-panel optimization on configured Monte-Carlo experiments.
"""

import sys
import os
from typing import Any, List, Dict
from fastmcp import FastMCP
from fastmcp.tools.tool import ToolResult
from mcp.types import TextContent
from experiment_manager import load_config, ExperimentManager
import tools

mcp = FastMCP("BD-RIS Placement Optimizer")

# Check for config file argument
script_dir = os.path.dirname(os.path.abspath(__file__))
config_path = os.path.join(script_dir, "config.yaml")
if len(sys.argv) > 2 and sys.argv[1] == "--config":
    config_path = sys.argv[2]

config = load_config(config_path)
manager = ExperimentManager(config)


def _text_result(result) -> ToolResult:
    return ToolResult(
        content=[TextContent(type="text", text=str(result))],
        structured_content=result.model_dump(),
    )


@mcp.tool()
def list_experiments() -> List[Dict[str, Any]]:
    """List all configured experiments"""
    return tools.list_experiments(manager)


@mcp.tool()
async def run_experiment(
    experiment: str,
    trials: int | None = None,
    seed: int | None = None,
    output_dir: str | None = None,
    threads: int | None = None,
) -> ToolResult:
    """Run an experiment sweep and write results.csv, metadata and plot scripts"""
    result = await tools.run_experiment(
        manager, experiment, trials, seed, output_dir, threads
    )
    return _text_result(result)


@mcp.tool()
async def summarize_results(path: str) -> ToolResult:
    """Per-point mean, std and 95% CI plus mobility and connectivity gaps"""
    result = await tools.summarize_results(path)
    return _text_result(result)


@mcp.tool()
async def optimize_trial(experiment: str, point_id: int, trial: int = 0) -> ToolResult:
    """Optimize a single sweep point and trial, returning the sum-rate trace"""
    result = await tools.optimize_trial(manager, experiment, point_id, trial)
    return _text_result(result)


@mcp.tool()
async def selftest(seed: int = 0, instances: int = 5) -> ToolResult:
    """Run the numerical self-checks on random instances"""
    result = await tools.selftest(seed, instances)
    return _text_result(result)


if __name__ == "__main__":
    mcp.run()
