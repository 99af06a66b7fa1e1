import asyncio
import os
from typing import List
from pydantic import BaseModel
from results_io import RESULTS_FILE, load_table
from sim_harness import GapSummary, PointSummary, TrendCheck, check_trends, summarize


class SummarizeResultsError(Exception):
    pass


class SummaryResponse(BaseModel):
    source: str
    points: List[PointSummary]
    gaps: List[GapSummary]
    trends: List[TrendCheck] = []

    def __str__(self) -> str:
        if not self.points:
            return f"{self.source}: (no results)"

        lines = [f"{self.source}:"]
        for point in self.points:
            lines.append(
                f"  M={point.M} N_t={point.N_t} L={point.L} l_s={point.l_s} "
                f"{point.architecture} {point.mobility}: "
                f"{point.mean:.3f} +/- {point.std:.3f} bits/s/Hz "
                f"[{point.ci_low:.3f}, {point.ci_high:.3f}] over {point.trials} trials"
            )
        if self.gaps:
            lines.append("Gaps:")
            for gap in self.gaps:
                lines.append(
                    f"  M={gap.M} N_t={gap.N_t} L={gap.L} l_s={gap.l_s} "
                    f"{gap.architecture} {gap.mobility} vs {gap.baseline}: {gap.gap:+.3f}"
                )
        if self.trends:
            lines.append("Trends:")
            lines.extend(f"  {trend}" for trend in self.trends)
        return "\n".join(lines)


async def summarize_results(path: str) -> SummaryResponse:
    """Summarize a results CSV, or the results.csv inside a directory"""
    if os.path.isdir(path):
        path = os.path.join(path, RESULTS_FILE)
    if not os.path.exists(path):
        raise SummarizeResultsError(f"No results found at {path}")

    loop = asyncio.get_event_loop()

    def _summarize_sync():
        return summarize(load_table(path))

    try:
        summary = await loop.run_in_executor(None, _summarize_sync)
    except Exception as e:
        raise SummarizeResultsError(f"Unable to summarize {path}: {str(e)}") from e

    return SummaryResponse(
        source=path,
        points=summary.points,
        gaps=summary.gaps,
        trends=check_trends(summary),
    )
