"""
Partially proximal ADMM for the admittance of a group-connected BD-RIS.

The scattering constraint u_k = Theta^H h_k is kept in its inverse-free form
(I - jZ0 B) u_k = (I + jZ0 B) h_k. The B-step is an unconstrained least
squares in the packed upper triangle of B, the U-step is one Hermitian
solve per user and the dual step is a plain ascent on the residual.
"""

import logging
import numpy as np
from dataclasses import dataclass, field
from scipy.linalg import cho_factor, cho_solve
from bdris_core import (
    AdmittanceMatrix,
    RisArchitecture,
    ScatteringMatrix,
    admittance_to_scattering,
    upper_triangular_pack,
    upper_triangular_unpack,
)
from channel_model import ChannelSet
from experiment_manager import SolverConfig

logger = logging.getLogger(__name__)

RIDGE = 1e-12
# Curvature of the weighted U-block objective as a fraction of the penalty
OBJECTIVE_CURVATURE_FRACTION = 0.125


@dataclass
class AdmmState:
    admittance: AdmittanceMatrix
    U: np.ndarray
    dual: np.ndarray
    penalty: float
    proximal: float
    residual_trace: list = field(default_factory=list)

    def __post_init__(self):
        assert self.penalty > 0, "penalty must be positive"
        assert self.proximal >= 0, "proximal must be non-negative"


@dataclass(frozen=True)
class AdmmResult:
    admittance: AdmittanceMatrix
    theta: ScatteringMatrix
    state: AdmmState
    residual: float
    iterations: int
    converged: bool
    flags: tuple = ()


def primal_residual(
    admittance: np.ndarray, U: np.ndarray, ris_ue: np.ndarray, reference_impedance: float
) -> float:
    """||(I - jZ0 B) U - (I + jZ0 B) H_U||_F"""
    return float(
        np.linalg.norm(_constraint_residual(admittance, U, ris_ue, reference_impedance))
    )


def _constraint_residual(admittance, U, ris_ue, reference_impedance):
    return U - ris_ue - 1j * reference_impedance * admittance @ (U + ris_ue)


def admm_objective(
    U: np.ndarray,
    bs_ris: np.ndarray,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
) -> float:
    """FP objective seen by the U block: sum_k 2 sqrt(1+rho_k) Re{psi_k* u_k^H H w_k} - |psi_k|^2 sum_i |u_k^H H w_i|^2"""
    gains = U.conj().T @ (bs_ris @ W)
    linear = 2.0 * np.sqrt(1.0 + rho) * np.real(np.diag(gains) * psi.conj())
    quadratic = np.abs(psi) ** 2 * np.sum(np.abs(gains) ** 2, axis=1)
    return float(np.sum(linear - quadratic))


def build_b_subproblem(
    U: np.ndarray,
    ris_ue: np.ndarray,
    dual: np.ndarray,
    reference_impedance: float,
    penalty: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Real stacking of the B-step: ||B M_mat - Gamma||_F^2 equals
    ||R + dual/penalty||_F^2 with R the constraint residual.
    """
    coupling = 1j * reference_impedance * (U + ris_ue)
    target = U - ris_ue + dual / penalty
    M_mat = np.hstack([coupling.real, coupling.imag])
    Gamma = np.hstack([target.real, target.imag])
    return M_mat, Gamma


def assemble_linear_map(
    M_mat: np.ndarray, Gamma: np.ndarray, arch: RisArchitecture
) -> tuple[np.ndarray, np.ndarray]:
    """
    A and b_vec with A @ pack(B) == (B @ M_mat).ravel() for every symmetric
    block-diagonal B, and b_vec == Gamma.ravel().

    Row r * 2K + c of A holds M_mat[s, c] in the packed column of B[r, s].
    An off-diagonal packed entry therefore collects the contributions of
    both B[r, s] and B[s, r].
    """
    index = arch.pack_index_matrix
    if M_mat.shape[0] != arch.total:
        raise ValueError(
            f"M_mat has {M_mat.shape[0]} rows, architecture has {arch.total} elements"
        )
    width = M_mat.shape[1]
    rows, cols = np.nonzero(index >= 0)
    A = np.zeros((arch.total, width, arch.pack_size))
    A[rows, :, index[rows, cols]] = M_mat[cols, :]
    return A.reshape(arch.total * width, arch.pack_size), Gamma.reshape(-1)


def b_step(
    A: np.ndarray,
    b_vec: np.ndarray,
    x_prev: np.ndarray,
    penalty: float,
    proximal: float,
) -> np.ndarray:
    """x = (A^T A + tau I)^-1 (A^T b + tau x_prev) with tau = proximal / penalty"""
    tau = proximal / penalty
    rhs = A.T @ b_vec + tau * x_prev
    num_rows, num_cols = A.shape

    if tau > 0 and num_rows < num_cols:
        # Woodbury form factorizes the smaller Gram matrix
        factor = cho_factor(A @ A.T + tau * np.eye(num_rows))
        return (rhs - A.T @ cho_solve(factor, A @ rhs)) / tau

    normal = A.T @ A + tau * np.eye(num_cols)
    try:
        factor = cho_factor(normal)
    except np.linalg.LinAlgError:
        factor = cho_factor(normal + RIDGE * np.eye(num_cols))
    return cho_solve(factor, rhs)


def b_step_diagonal(
    M_mat: np.ndarray,
    Gamma: np.ndarray,
    x_prev: np.ndarray,
    penalty: float,
    proximal: float,
) -> np.ndarray:
    """Single-connected fast path: one scalar least squares per element"""
    tau = proximal / penalty
    numerator = np.sum(M_mat * Gamma, axis=1) + tau * x_prev
    denominator = np.sum(M_mat**2, axis=1) + tau
    denominator = np.where(denominator > 0.0, denominator, RIDGE)
    return numerator / denominator


def u_step(
    admittance: np.ndarray,
    bs_ris: np.ndarray,
    ris_ue: np.ndarray,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
    dual: np.ndarray,
    penalty: float,
    reference_impedance: float,
    weight: float = 1.0,
) -> np.ndarray:
    """Closed-form maximizer of the augmented Lagrangian in each column u_k"""
    num_elements = admittance.shape[0]
    identity = np.eye(num_elements)
    forward = identity + 1j * reference_impedance * admittance
    HW = bs_ris @ W
    interference = HW @ HW.conj().T
    base = (penalty / 2.0) * (
        identity + reference_impedance**2 * admittance @ admittance
    )

    U = np.empty_like(ris_ue, dtype=complex)
    for k in range(ris_ue.shape[1]):
        system = weight * np.abs(psi[k]) ** 2 * interference + base
        system = (system + system.conj().T) / 2.0
        rhs = weight * np.sqrt(1.0 + rho[k]) * np.conj(psi[k]) * HW[:, k] + (
            penalty * forward @ (forward @ ris_ue[:, k]) - forward @ dual[:, k]
        ) / 2.0
        U[:, k] = cho_solve(cho_factor(system), rhs)
    return U


def dual_step(
    admittance: np.ndarray,
    U: np.ndarray,
    ris_ue: np.ndarray,
    dual: np.ndarray,
    penalty: float,
    reference_impedance: float,
) -> np.ndarray:
    return dual + penalty * _constraint_residual(
        admittance, U, ris_ue, reference_impedance
    )


def objective_weight(
    bs_ris: np.ndarray, W: np.ndarray, psi: np.ndarray, penalty: float
) -> float:
    """
    Weight that puts the curvature of the U-block objective, max_k |psi_k|^2
    ||H W||_2^2, at OBJECTIVE_CURVATURE_FRACTION * penalty. The weighted
    problem has the same stationary points in B.
    """
    curvature = float(np.max(np.abs(psi)) ** 2 * np.linalg.norm(bs_ris @ W, 2) ** 2)
    if curvature <= 0.0:
        return 1.0
    return OBJECTIVE_CURVATURE_FRACTION * penalty / curvature


def run_admm(
    channels: ChannelSet,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
    arch: RisArchitecture,
    config: SolverConfig,
    admittance: AdmittanceMatrix | None = None,
    warm_start: AdmmState | None = None,
    reference_impedance: float = 50.0,
) -> AdmmResult:
    """
    Iterate B, U and dual steps until the primal residual falls below
    tol_admm, or max_admm iterations pass.

    U starts exactly feasible at Theta^H H_U for the current channel. A warm
    start seeds the dual, which carries no channel scale because the U-block
    objective is weighted to a fixed curvature.

    The returned admittance is the best iterate by the FP objective evaluated
    at the exactly feasible U = Theta^H H_U, the starting admittance included,
    so the recovered Theta is always a valid scattering matrix.
    """
    if admittance is None:
        admittance = (
            warm_start.admittance
            if warm_start is not None
            else AdmittanceMatrix.zeros(arch, reference_impedance)
        )
    z0 = admittance.reference_impedance
    penalty, proximal = config.penalty, config.proximal

    # Work on H_U with unit average column norm; psi / scale keeps the objective unchanged
    norm = np.linalg.norm(channels.ris_ue)
    scale = np.sqrt(channels.num_users) / norm if norm > 0 else 1.0
    ris_ue = scale * channels.ris_ue
    psi_scaled = psi / scale
    weight = objective_weight(channels.bs_ris, W, psi_scaled, penalty)

    theta_start = admittance_to_scattering(admittance).full()
    U = theta_start.conj().T @ ris_ue
    dual = np.zeros_like(ris_ue, dtype=complex)
    if warm_start is not None and warm_start.dual.shape == dual.shape:
        dual = warm_start.dual.copy()
    x = upper_triangular_pack(admittance)
    current = admittance

    def feasible_objective(candidate: AdmittanceMatrix) -> tuple[float, ScatteringMatrix]:
        theta = admittance_to_scattering(candidate)
        U_feasible = theta.full().conj().T @ channels.ris_ue
        return admm_objective(U_feasible, channels.bs_ris, W, rho, psi), theta

    best_value, best_theta = feasible_objective(admittance)
    best_admittance = admittance

    residual = primal_residual(current.full(), U, ris_ue, z0)
    residual_trace = [residual]
    converged = False
    iterations = 0
    while iterations < config.max_admm:
        iterations += 1
        M_mat, Gamma = build_b_subproblem(U, ris_ue, dual, z0, penalty)
        if arch.kind == "single":
            x = b_step_diagonal(M_mat, Gamma, x, penalty, proximal)
        else:
            A, b_vec = assemble_linear_map(M_mat, Gamma, arch)
            x = b_step(A, b_vec, x, penalty, proximal)
        current = upper_triangular_unpack(x, arch, z0)
        B = current.full()

        U = u_step(
            B, channels.bs_ris, ris_ue, W, rho, psi_scaled, dual, penalty, z0, weight
        )
        dual = dual_step(B, U, ris_ue, dual, penalty, z0)

        residual = primal_residual(B, U, ris_ue, z0)
        residual_trace.append(residual)

        value, theta = feasible_objective(current)
        if value > best_value:
            best_value, best_theta, best_admittance = value, theta, current

        if residual < config.tol_admm:
            converged = True
            break

    flags = ()
    if not converged:
        flags = ("admm_not_converged",)
        logger.warning(
            f"ADMM stopped after {iterations} iterations with residual {residual:.3e}"
        )
    else:
        logger.debug(f"ADMM converged in {iterations} iterations")

    state = AdmmState(
        admittance=best_admittance,
        U=U,
        dual=dual,
        penalty=penalty,
        proximal=proximal,
        residual_trace=residual_trace,
    )
    return AdmmResult(
        admittance=best_admittance,
        theta=best_theta,
        state=state,
        residual=residual,
        iterations=iterations,
        converged=converged,
        flags=flags,
    )
