"""
Monte-Carlo sweeps over (M, N_t, L, l_s, architecture, mobility).

Every trial draws its UE positions and path environment from a seed keyed by
(base_seed, scenario, trial). All architectures and both mobility modes of a
scenario point therefore see the same channel draws, so their differences
are paired comparisons.
"""

import logging
import time
import numpy as np
from collections import defaultdict
from multiprocessing import Pool
from typing import List, Literal
from pydantic import BaseModel
from scipy.stats import norm
from bdris_core import RisArchitecture
from channel_model import fixed_layout_geometry, place_users, sample_environment
from channel_provider import FieldResponseChannelProvider
from experiment_manager import ExperimentSpec, Mobility, SweepPoint
from fp_solver import OptimizationResult, optimize

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95


class ResultRow(BaseModel):
    point_id: int
    M: int
    N_G: int
    N_E: int
    N_t: int
    L: int
    l_s: float
    mobility: Mobility
    P_dBm: float
    trial: int
    sum_rate_bps_hz: float
    outer_iters: int
    admm_resid: float
    wall_ms: float
    flags: List[str] = []

    @property
    def architecture(self) -> str:
        return RisArchitecture(self.N_G, self.N_E).label

    @property
    def failed(self) -> bool:
        return any(flag.startswith("error:") for flag in self.flags)

    def deterministic_fields(self) -> dict:
        """Row contents without the wall-clock timing"""
        return self.model_dump(exclude={"wall_ms"})


class PointSummary(BaseModel):
    point_id: int
    M: int
    N_t: int
    L: int
    l_s: float
    P_dBm: float
    architecture: str
    mobility: Mobility
    trials: int
    failures: int
    mean: float
    std: float
    ci_low: float
    ci_high: float


class GapSummary(BaseModel):
    kind: Literal["mobility", "connectivity"]
    M: int
    N_t: int
    L: int
    l_s: float
    P_dBm: float
    architecture: str
    mobility: str
    baseline: str
    gap: float


class ExperimentSummary(BaseModel):
    points: List[PointSummary]
    gaps: List[GapSummary]

    def mobility_gap(self, architecture: str, M: int) -> float | None:
        for gap in self.gaps:
            if gap.kind == "mobility" and gap.architecture == architecture and gap.M == M:
                return gap.gap
        return None

    def connectivity_gap(
        self, architecture: str, M: int, mobility: str = "MA"
    ) -> float | None:
        for gap in self.gaps:
            if (
                gap.kind == "connectivity"
                and gap.architecture == architecture
                and gap.mobility == mobility
                and gap.M == M
            ):
                return gap.gap
        return None


class TrendCheck(BaseModel):
    name: str
    holds: bool | None
    detail: str

    def __str__(self) -> str:
        status = {True: "holds", False: "VIOLATED", None: "not enough points"}[self.holds]
        return f"{self.name}: {status} ({self.detail})"


def derive_seed(base_seed: int, key: int, trial: int) -> int:
    """Stable 64-bit seed for (base_seed, key, trial)"""
    sequence = np.random.SeedSequence([base_seed, key, trial])
    return int(sequence.generate_state(1, np.uint64)[0])


def solve_trial(
    spec: ExperimentSpec, point: SweepPoint, trial: int
) -> OptimizationResult:
    """Draw the trial's scenario and run the joint optimization on it"""
    scenario = spec.scenario
    seed = derive_seed(spec.base_seed, point.scenario_id, trial)
    ue_sequence, env_sequence = np.random.SeedSequence(seed).spawn(2)

    ue_positions = place_users(
        scenario.num_users, scenario.ris_ue_radius, np.random.default_rng(ue_sequence)
    )
    env = sample_environment(scenario, point.num_paths, env_sequence, ue_positions)
    arch = point.arch()
    geometry = fixed_layout_geometry(
        point.num_elements,
        arch.group_size,
        point.num_antennas,
        point.area_scale,
        ue_positions,
        scenario,
    )
    provider = FieldResponseChannelProvider(env, scenario.noise_power)
    return optimize(
        provider,
        arch,
        geometry,
        spec.solver,
        scenario.power_watts,
        scenario.reference_impedance,
        point.mobility,
    )


def run_trial(spec: ExperimentSpec, point: SweepPoint, trial: int) -> ResultRow:
    arch = point.arch()
    start = time.perf_counter()
    try:
        result = solve_trial(spec, point, trial)
        rate = result.sum_rate
        iterations = result.outer_iterations
        residual = result.admm_residual
        flags = list(result.flags)
    except Exception as e:
        logger.error(
            f"Trial {trial} of point {point.point_id} failed: {type(e).__name__}: {e}"
        )
        rate, iterations, residual = float("nan"), 0, float("nan")
        flags = [f"error:{type(e).__name__}"]
    wall_ms = (time.perf_counter() - start) * 1000.0

    return ResultRow(
        point_id=point.point_id,
        M=point.num_elements,
        N_G=arch.num_groups,
        N_E=arch.group_size,
        N_t=point.num_antennas,
        L=point.num_paths,
        l_s=point.area_scale,
        mobility=point.mobility,
        P_dBm=spec.scenario.power_dbm,
        trial=trial,
        sum_rate_bps_hz=rate,
        outer_iters=iterations,
        admm_resid=residual,
        wall_ms=wall_ms,
        flags=flags,
    )


def _run_task(task: tuple) -> ResultRow:
    spec, point, trial = task
    return run_trial(spec, point, trial)


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> List[ResultRow]:
    """
    Run every (sweep point, trial) pair. Rows come back ordered by
    (point_id, trial) whatever the worker schedule.
    """
    jobs = [
        (point, trial) for point in spec.sweep_points() for trial in range(spec.trials)
    ]
    logger.info(f"Running {len(jobs)} trials with {threads} worker(s)")

    if threads > 1 and len(jobs) > 1:
        tasks = [(spec, point, trial) for point, trial in jobs]
        with Pool(processes=threads) as pool:
            rows = list(pool.imap(_run_task, tasks))
    else:
        rows = [run_trial(spec, point, trial) for point, trial in jobs]

    failures = sum(row.failed for row in rows)
    if failures:
        logger.warning(f"{failures} of {len(rows)} trials failed")
    return sorted(rows, key=lambda row: (row.point_id, row.trial))


def _summarize_point(rows: List[ResultRow]) -> PointSummary:
    first = rows[0]
    rates = np.array([row.sum_rate_bps_hz for row in rows if not row.failed])
    count = rates.shape[0]
    if count == 0:
        mean = std = half_width = float("nan")
    else:
        mean = float(np.mean(rates))
        std = float(np.std(rates, ddof=1)) if count > 1 else 0.0
        half_width = norm.ppf(0.5 + CONFIDENCE / 2.0) * std / np.sqrt(count)

    return PointSummary(
        point_id=first.point_id,
        M=first.M,
        N_t=first.N_t,
        L=first.L,
        l_s=first.l_s,
        P_dBm=first.P_dBm,
        architecture=first.architecture,
        mobility=first.mobility,
        trials=len(rows),
        failures=len(rows) - count,
        mean=mean,
        std=std,
        ci_low=mean - half_width,
        ci_high=mean + half_width,
    )


def summarize(rows: List[ResultRow]) -> ExperimentSummary:
    """
    Per-point mean, sample std and 95% normal confidence interval, plus the
    MA-minus-FA gap per architecture and the gap of every architecture over
    single-connected per mobility mode.
    """
    by_point = defaultdict(list)
    for row in rows:
        by_point[row.point_id].append(row)
    points = [_summarize_point(by_point[point_id]) for point_id in sorted(by_point)]

    means = {}
    for point in points:
        key = (point.M, point.N_t, point.L, point.l_s, point.P_dBm)
        means[key + (point.architecture, point.mobility)] = point.mean

    gaps = []
    for (M, N_t, L, l_s, P_dBm, architecture, mobility), mean in means.items():
        key = (M, N_t, L, l_s, P_dBm)
        common = dict(M=M, N_t=N_t, L=L, l_s=l_s, P_dBm=P_dBm)
        if mobility == "MA" and key + (architecture, "FA") in means:
            gaps.append(
                GapSummary(
                    kind="mobility",
                    architecture=architecture,
                    mobility="MA",
                    baseline="FA",
                    gap=mean - means[key + (architecture, "FA")],
                    **common,
                )
            )
        if architecture != "single" and key + ("single", mobility) in means:
            gaps.append(
                GapSummary(
                    kind="connectivity",
                    architecture=architecture,
                    mobility=mobility,
                    baseline="single",
                    gap=mean - means[key + ("single", mobility)],
                    **common,
                )
            )

    return ExperimentSummary(points=points, gaps=gaps)



def _group_size(point: PointSummary) -> int:
    return RisArchitecture.from_label(point.M, point.architecture).group_size


def _extreme_gap_pairs(gaps: List[GapSummary]) -> list[tuple[float, float]]:
    """(gap at the smallest M, gap at the largest M) per setting"""
    by_setting = defaultdict(dict)
    for gap in gaps:
        by_setting[(gap.N_t, gap.L, gap.l_s, gap.P_dBm, gap.mobility)][gap.M] = gap.gap
    pairs = []
    for by_m in by_setting.values():
        if len(by_m) > 1:
            pairs.append((by_m[min(by_m)], by_m[max(by_m)]))
    return pairs


def check_trends(summary: ExperimentSummary) -> List[TrendCheck]:
    """
    Orderings of trial means expected from a connectivity and movability sweep.

    connectivity_order: at the largest M, means grow with the group size.
    movability_gain: MA is never below FA.
    movability_gain_shrinks: the single-connected MA gain is larger at the
    smallest M than at the largest.
    connectivity_gain_grows: the fully-connected gain over single-connected
    is larger at the largest M than at the smallest.
    """
    points = [point for point in summary.points if not np.isnan(point.mean)]
    largest = max((point.M for point in points), default=None)

    by_setting = defaultdict(list)
    for point in points:
        if point.M == largest:
            key = (point.N_t, point.L, point.l_s, point.P_dBm, point.mobility)
            by_setting[key].append(point)
    orderings = []
    for setting in by_setting.values():
        if len(setting) < 2:
            continue
        means = [point.mean for point in sorted(setting, key=_group_size)]
        pairs = zip(means, means[1:])
        orderings.append(all(after >= before for before, after in pairs))

    mobility = [gap for gap in summary.gaps if gap.kind == "mobility"]
    shrinks = _extreme_gap_pairs(
        [gap for gap in mobility if gap.architecture == "single"]
    )
    grows = _extreme_gap_pairs(
        [
            gap
            for gap in summary.gaps
            if gap.kind == "connectivity" and gap.architecture == "fully"
        ]
    )

    def verdict(results: list) -> bool | None:
        return all(results) if results else None

    return [
        TrendCheck(
            name="connectivity_order",
            holds=verdict(orderings),
            detail=f"fully >= group >= single at M={largest}",
        ),
        TrendCheck(
            name="movability_gain",
            holds=verdict([gap.gap >= 0.0 for gap in mobility]),
            detail="MA >= FA for every architecture",
        ),
        TrendCheck(
            name="movability_gain_shrinks",
            holds=verdict([small > large for small, large in shrinks]),
            detail="single-connected MA-FA gap larger at the smallest M",
        ),
        TrendCheck(
            name="connectivity_gain_grows",
            holds=verdict([large > small for small, large in grows]),
            detail="fully-minus-single gap larger at the largest M",
        ),
    ]
