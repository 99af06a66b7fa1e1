import os
import pytest

from results_io import RESULTS_FILE, write_results_csv
from sim_harness import ResultRow
from tools.summarize_results import (
    summarize_results,
    SummaryResponse,
    SummarizeResultsError,
)


def make_row(point_id, N_G, N_E, mobility, rate, trial=0):
    return ResultRow(
        point_id=point_id,
        M=N_G * N_E,
        N_G=N_G,
        N_E=N_E,
        N_t=2,
        L=2,
        l_s=1.5,
        mobility=mobility,
        P_dBm=10.0,
        trial=trial,
        sum_rate_bps_hz=rate,
        outer_iters=4,
        admm_resid=1e-6,
        wall_ms=5.0,
    )


@pytest.fixture
def results_dir(tmp_path):
    """Fixture to provide a directory holding a small results.csv"""
    rows = [
        make_row(0, 4, 1, "MA", 3.0, trial=0),
        make_row(0, 4, 1, "MA", 5.0, trial=1),
        make_row(1, 4, 1, "FA", 2.0),
        make_row(2, 2, 2, "MA", 4.5),
        make_row(3, 2, 2, "FA", 3.0),
    ]
    write_results_csv(rows, str(tmp_path / RESULTS_FILE))
    return tmp_path


async def test_summarize_results_directory(results_dir):
    """Test that a directory path resolves to its results.csv"""
    result = await summarize_results(str(results_dir))

    assert isinstance(result, SummaryResponse)
    assert result.source == os.path.join(str(results_dir), RESULTS_FILE)
    assert len(result.points) == 4
    assert result.points[0].mean == pytest.approx(4.0)
    assert result.points[0].trials == 2


async def test_summarize_results_gaps(results_dir):
    """Test the mobility and connectivity gaps in the summary"""
    result = await summarize_results(os.path.join(str(results_dir), RESULTS_FILE))
    gaps = {(g.kind, g.architecture, g.mobility): g.gap for g in result.gaps}

    assert gaps[("mobility", "single", "MA")] == pytest.approx(2.0)
    assert gaps[("mobility", "group-2", "MA")] == pytest.approx(1.5)
    assert gaps[("connectivity", "group-2", "MA")] == pytest.approx(0.5)
    assert gaps[("connectivity", "group-2", "FA")] == pytest.approx(1.0)
    assert "group-2 MA vs single: +0.500" in str(result)


async def test_summarize_results_empty(tmp_path):
    """Test that a header-only table gives an empty summary"""
    write_results_csv([], str(tmp_path / RESULTS_FILE))
    result = await summarize_results(str(tmp_path))
    assert result.points == []
    assert str(result).endswith("(no results)")


async def test_summarize_results_missing(tmp_path):
    """Test that a missing file raises SummarizeResultsError"""
    with pytest.raises(SummarizeResultsError, match="No results found"):
        await summarize_results(str(tmp_path / "nothing.csv"))


async def test_summarize_results_bad_header(tmp_path):
    """Test that a foreign CSV raises SummarizeResultsError"""
    path = tmp_path / "foreign.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(SummarizeResultsError, match="Unable to summarize"):
        await summarize_results(str(path))
