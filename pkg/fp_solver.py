"""
Sum-rate metrics, the fractional-programming reformulation and the outer
block-coordinate loop over (auxiliaries, W, Theta/B, c).
"""

import logging
import numpy as np
from dataclasses import dataclass, field
from admm_scattering import AdmmState, run_admm
from bdris_core import (
    AdmittanceMatrix,
    ArchitectureError,
    RisArchitecture,
    ScatteringMatrix,
)
from beamforming import (
    BeamformingError,
    build_quadratics,
    effective_channels,
    mrt_beamformer,
    solve_beamformer,
)
from channel_model import ChannelSet, SystemGeometry
from channel_provider import ChannelProvider, ChannelProviderError
from experiment_manager import ConfigurationError, Mobility, SolverConfig
from placement_sca import optimize_positions

logger = logging.getLogger(__name__)

BLOCK_ERRORS = (
    ArchitectureError,
    BeamformingError,
    ChannelProviderError,
    ConfigurationError,
    np.linalg.LinAlgError,
    ValueError,
)


class OptimizationError(Exception):
    def __init__(self, block: str, message: str):
        super().__init__(f"{block} block failed: {message}")
        self.block = block


@dataclass
class FpState:
    rho: np.ndarray
    psi: np.ndarray
    W: np.ndarray
    objective_trace: list = field(default_factory=list)


@dataclass
class OptimizationResult:
    W: np.ndarray
    theta: ScatteringMatrix
    admittance: AdmittanceMatrix
    geometry: SystemGeometry
    channels: ChannelSet
    trace: list
    outer_iterations: int
    admm_residual: float
    converged: bool
    state: FpState
    flags: list = field(default_factory=list)

    @property
    def sum_rate(self) -> float:
        return self.trace[-1]


def effective_gains(
    channels: ChannelSet, theta: np.ndarray, W: np.ndarray
) -> np.ndarray:
    """K x K matrix x_{k,i} = h_k^H Theta H w_i"""
    return effective_channels(channels, theta).conj().T @ W


def sinr_all(channels: ChannelSet, theta: np.ndarray, W: np.ndarray) -> np.ndarray:
    powers = np.abs(effective_gains(channels, theta, W)) ** 2
    signal = np.diag(powers)
    interference = np.sum(powers * (1.0 - np.eye(powers.shape[0])), axis=1)
    return signal / (interference + channels.noise_power)


def sinr(channels: ChannelSet, theta: np.ndarray, W: np.ndarray, k: int) -> float:
    return float(sinr_all(channels, theta, W)[k])


def sum_rate(channels: ChannelSet, theta: np.ndarray, W: np.ndarray) -> float:
    """Sum of log2(1 + SINR_k) in bits/s/Hz"""
    return float(np.sum(np.log2(1.0 + sinr_all(channels, theta, W))))


def update_auxiliaries(
    channels: ChannelSet, theta: np.ndarray, W: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    gains = effective_gains(channels, theta, W)
    received = np.sum(np.abs(gains) ** 2, axis=1) + channels.noise_power
    rho = sinr_all(channels, theta, W)
    psi = np.sqrt(1.0 + rho) * np.diag(gains) / received
    return rho, psi


def fp_objective(
    channels: ChannelSet,
    theta: np.ndarray,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
) -> float:
    """
    Quadratic-transform objective in bits:

        sum_k ln(1+rho_k) - rho_k + 2 sqrt(1+rho_k) Re{psi_k* x_kk}
              - |psi_k|^2 (sum_i |x_ki|^2 + sigma^2)

    divided by ln 2. At the closed-form auxiliaries it equals sum_rate.
    """
    gains = effective_gains(channels, theta, W)
    received = np.sum(np.abs(gains) ** 2, axis=1) + channels.noise_power
    value = (
        np.log1p(rho)
        - rho
        + 2.0 * np.sqrt(1.0 + rho) * np.real(np.conj(psi) * np.diag(gains))
        - np.abs(psi) ** 2 * received
    )
    return float(np.sum(value) / np.log(2.0))


def _run_block(block: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except BLOCK_ERRORS as e:
        raise OptimizationError(block, str(e)) from e


def _accepts(candidate: float, current: float, slack: float) -> bool:
    return candidate >= current - slack


def grid_start_positions(
    provider: ChannelProvider,
    channels: ChannelSet,
    geometry: SystemGeometry,
    theta: np.ndarray,
    power_watts: float,
    resolution: int,
) -> tuple[SystemGeometry, ChannelSet]:
    """
    Move each group, in ascending order, to the best point of a
    resolution x resolution grid over the reference box, scored by the MRT
    sum-rate. Grid points closer than min_spacing to another group are
    skipped, and a group only moves when a point scores strictly higher.
    """
    box = geometry.reference_box()
    xs = np.linspace(box.x_min, box.x_max, resolution)
    ys = np.linspace(box.y_min, box.y_max, resolution)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)

    def score(candidate: ChannelSet) -> float:
        return sum_rate(candidate, theta, mrt_beamformer(candidate, theta, power_watts))

    best = score(channels)
    for g in range(geometry.num_groups):
        others = np.delete(geometry.group_refs, g, axis=0)
        points = grid
        if len(others):
            gaps = np.linalg.norm(grid[:, None, :] - others[None, :, :], axis=-1)
            points = grid[gaps.min(axis=1) >= geometry.min_spacing]
        for point in points:
            refs = geometry.group_refs.copy()
            refs[g] = point
            moved = geometry.with_refs(refs)
            moved_channels = provider.refresh_group(channels, moved, g)
            value = score(moved_channels)
            if value > best:
                best, geometry, channels = value, moved, moved_channels

    logger.debug(f"Grid start: MRT sum-rate {best:.6f} bits/s/Hz")
    return geometry, channels


def optimize(
    provider: ChannelProvider,
    arch: RisArchitecture,
    geometry: SystemGeometry,
    config: SolverConfig,
    power_watts: float,
    reference_impedance: float = 50.0,
    mobility: Mobility = "MA",
) -> OptimizationResult:
    """
    Alternate the auxiliary, beamformer, scattering and placement blocks.

    Each block result is kept only if the true sum-rate does not drop by more
    than accept_slack, so the returned trace is non-decreasing. Starts from MRT
    on Theta = I at the given geometry, or at the grid start when
    placement_grid is set in MA mode.
    """
    if power_watts < 0:
        raise OptimizationError(
            "beamformer", f"Power budget must be non-negative, got {power_watts}"
        )
    if (geometry.num_groups, geometry.group_size) != (arch.num_groups, arch.group_size):
        raise OptimizationError(
            "scattering",
            f"Geometry has {geometry.num_groups}x{geometry.group_size} elements, "
            f"architecture {arch.num_groups}x{arch.group_size}",
        )
    if mobility == "MA" and not provider.supports_placement:
        raise OptimizationError(
            "placement", f"{type(provider).__name__} cannot rebuild moved channels"
        )

    channels = _run_block("placement", provider.build, geometry)
    admittance = AdmittanceMatrix.zeros(arch, reference_impedance)
    theta = ScatteringMatrix.identity(arch)
    theta_full = theta.full()
    if mobility == "MA" and config.placement_grid > 0:
        geometry, channels = _run_block(
            "placement",
            grid_start_positions,
            provider,
            channels,
            geometry,
            theta_full,
            power_watts,
            config.placement_grid,
        )
    W = mrt_beamformer(channels, theta_full, power_watts)

    current = sum_rate(channels, theta_full, W)
    trace = [current]
    rho, psi = _run_block("auxiliaries", update_auxiliaries, channels, theta_full, W)
    flags = []
    admm_residual = 0.0
    admm_state: AdmmState | None = None
    converged = False
    iteration = 0

    def flag(name: str):
        if name not in flags:
            flags.append(name)

    for iteration in range(1, config.max_outer + 1):
        previous = current

        rho, psi = _run_block("auxiliaries", update_auxiliaries, channels, theta_full, W)
        Q, q = _run_block("beamformer", build_quadratics, channels, theta_full, rho, psi)
        solution = _run_block(
            "beamformer",
            solve_beamformer,
            Q,
            q,
            power_watts,
            config.bisection_tol,
            config.max_bisection,
        )
        candidate = sum_rate(channels, theta_full, solution.W)
        if _accepts(candidate, current, config.accept_slack):
            W, current = solution.W, candidate
        else:
            logger.warning(f"Rejected beamformer update: {candidate:.6f} < {current:.6f}")
            flag("beamformer_rejected")

        rho, psi = _run_block("auxiliaries", update_auxiliaries, channels, theta_full, W)
        admm = _run_block(
            "scattering",
            run_admm,
            channels,
            W,
            rho,
            psi,
            arch,
            config,
            admittance=admittance,
            warm_start=admm_state,
            reference_impedance=reference_impedance,
        )
        admm_state = admm.state
        admm_residual = admm.residual
        for name in admm.flags:
            flag(name)
        candidate_full = admm.theta.full()
        candidate = sum_rate(channels, candidate_full, W)
        if _accepts(candidate, current, config.accept_slack):
            admittance, theta, theta_full = admm.admittance, admm.theta, candidate_full
            current = candidate
        else:
            logger.warning(f"Rejected scattering update: {candidate:.6f} < {current:.6f}")
            flag("scattering_rejected")

        if mobility == "MA":
            rho, psi = _run_block(
                "auxiliaries", update_auxiliaries, channels, theta_full, W
            )
            placement = _run_block(
                "placement",
                optimize_positions,
                provider,
                channels,
                geometry,
                theta,
                W,
                rho,
                psi,
                config,
            )
            for name in placement.flags:
                flag(name)
            candidate = sum_rate(placement.channels, theta_full, W)
            if _accepts(candidate, current, config.accept_slack):
                geometry, channels = placement.geometry, placement.channels
                current = candidate
            else:
                logger.warning(
                    f"Rejected placement update: {candidate:.6f} < {current:.6f}"
                )
                flag("placement_rejected")

        trace.append(current)
        logger.debug(f"Outer iteration {iteration}: sum-rate {current:.6f} bits/s/Hz")

        if abs(current - previous) <= config.tol_outer * max(
            abs(previous), np.finfo(float).tiny
        ):
            converged = True
            break

    if not converged:
        flag("max_outer_reached")

    return OptimizationResult(
        W=W,
        theta=theta,
        admittance=admittance,
        geometry=geometry,
        channels=channels,
        trace=trace,
        outer_iterations=iteration,
        admm_residual=admm_residual,
        converged=converged,
        state=FpState(rho=rho, psi=psi, W=W, objective_trace=trace),
        flags=flags,
    )
