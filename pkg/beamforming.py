import logging
import numpy as np
from dataclasses import dataclass
from scipy.linalg import eigh
from channel_model import ChannelSet

logger = logging.getLogger(__name__)


class BeamformingError(Exception):
    pass


@dataclass(frozen=True)
class BeamformerSolution:
    W: np.ndarray
    multiplier: float
    power: float


def effective_channels(channels: ChannelSet, theta: np.ndarray) -> np.ndarray:
    """N_t x K matrix with columns a_k = H^H Theta^H h_k"""
    return (theta @ channels.bs_ris).conj().T @ channels.ris_ue


def build_quadratics(
    channels: ChannelSet,
    theta: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Q = sum_i |psi_i|^2 a_i a_i^H and q_k = sqrt(1 + rho_k) psi_k a_k.

    The columns of the returned q are the q_k.
    """
    a = effective_channels(channels, theta)
    Q = (a * np.abs(psi) ** 2) @ a.conj().T
    Q = (Q + Q.conj().T) / 2.0
    q = a * (np.sqrt(1.0 + rho) * psi)
    return Q, q


def beamformer_objective(Q: np.ndarray, q: np.ndarray, W: np.ndarray) -> float:
    """FP objective restricted to W: sum_k 2 Re{w_k^H q_k} - w_k^H Q w_k"""
    linear = 2.0 * np.real(np.sum(W.conj() * q))
    quadratic = np.real(np.sum(W.conj() * (Q @ W)))
    return float(linear - quadratic)


def mrt_beamformer(
    channels: ChannelSet, theta: np.ndarray, power_budget: float
) -> np.ndarray:
    a = effective_channels(channels, theta)
    norm = np.linalg.norm(a)
    if norm == 0.0 or power_budget <= 0.0:
        return np.zeros_like(a)
    return a * (np.sqrt(power_budget) / norm)


def solve_beamformer(
    Q: np.ndarray,
    q: np.ndarray,
    power_budget: float,
    tol: float = 1e-6,
    max_halvings: int = 200,
) -> BeamformerSolution:
    """
    w_k = (Q + lambda I)^-1 q_k with the smallest lambda >= 0 meeting
    Tr(W^H W) <= P; lambda is found by bisection on the power curve.
    """
    if power_budget < 0:
        raise BeamformingError(f"Power budget must be non-negative, got {power_budget}")

    if power_budget == 0 or not np.any(q):
        return BeamformerSolution(W=np.zeros_like(q), multiplier=0.0, power=0.0)

    num_antennas = Q.shape[0]
    eigvals, eigvecs = eigh(Q)
    eigvals = np.clip(eigvals, 0.0, None)
    projections = eigvecs.conj().T @ q
    weights = np.sum(np.abs(projections) ** 2, axis=1)

    def power(multiplier: float) -> float:
        return float(np.sum(weights / (eigvals + multiplier) ** 2))

    # Singular Q: lambda = 0 is replaced by a tiny regularizer
    floor = 1e-12 * (1.0 + np.real(np.trace(Q)) / num_antennas)
    start = 0.0 if eigvals.min() > floor else floor

    if power(start) <= power_budget:
        multiplier = start
    else:
        low, high = start, max(1.0, start)
        while power(high) > power_budget:
            low, high = high, 2.0 * high

        for _ in range(max_halvings):
            if power_budget - power(high) <= tol * power_budget:
                break
            middle = 0.5 * (low + high)
            if power(middle) > power_budget:
                low = middle
            else:
                high = middle
        multiplier = high

    W = eigvecs @ (projections / (eigvals + multiplier)[:, None])
    used = float(np.real(np.sum(np.abs(W) ** 2)))
    logger.debug(f"Beamformer multiplier {multiplier:.3e}, power {used:.3e}")
    return BeamformerSolution(W=W, multiplier=multiplier, power=used)
