"""
Per-group placement by successive convex approximation.

With every other group frozen, the part of the FP objective that depends on
the reference point c of group g is

    mu(c) = sum_k [ -sum_k' |f(c)^H C_kk' g_k(c)|^2 + 2 Re{f(c)^H E_k g_k(c)} ]

where f and g_k are the path phase vectors of c for the BS->RIS arrival and
RIS->UE_k departure directions. The coefficient matrices C, E absorb the
intra-group offsets, the group's scattering block, the beamformer and the
frozen contribution of the other groups.

Each step maximizes the curvature-bounded quadratic minorant of mu over the
reference box intersected with the linearized spacing half-planes.
"""

import logging
import numpy as np
from dataclasses import dataclass, field
from bdris_core import ScatteringMatrix
from channel_model import (
    ChannelSet,
    PathEnvironment,
    SystemGeometry,
    field_response_matrix,
)
from channel_provider import ChannelProvider
from experiment_manager import Mobility, SolverConfig

logger = logging.getLogger(__name__)

MINORIZATION_SLACK = 1e-9


@dataclass(frozen=True)
class PlacementCoefficients:
    group: int
    C: np.ndarray  # (K, K, L_r, L_t)
    D: np.ndarray  # (K, L_r, L_t)
    E: np.ndarray  # (K, L_r, L_t)
    cross: np.ndarray  # (K, K) frozen contribution a_{k,k'} of the other groups
    receive_wavevectors: np.ndarray  # (L_r, 2)
    transmit_wavevectors: np.ndarray  # (K, L_t, 2)
    wavelength: float

    @property
    def num_users(self) -> int:
        return self.C.shape[0]

    def phase_gradients(self) -> np.ndarray:
        """(K, L_r, L_t, 2): d/dc of the phase of the (q, p) term, i.e. (beta, gamma)"""
        return (
            self.transmit_wavevectors[:, None, :, :]
            - self.receive_wavevectors[None, :, None, :]
        )

    def phases(self, c: np.ndarray) -> np.ndarray:
        """(K, L_r, L_t) phase of conj(f_q(c)) g_{k,p}(c)"""
        return self.phase_gradients() @ np.asarray(c, dtype=float)


@dataclass(frozen=True)
class SurrogateModel:
    gradient: np.ndarray
    curvature: float
    expansion_point: np.ndarray
    value: float

    def evaluate(self, c: np.ndarray) -> float:
        step = np.asarray(c, dtype=float) - self.expansion_point
        return float(
            self.value + self.gradient @ step - 0.5 * self.curvature * step @ step
        )


@dataclass(frozen=True)
class PlacementStep:
    point: np.ndarray
    flag: str | None = None


@dataclass
class PlacementResult:
    geometry: SystemGeometry
    channels: ChannelSet
    sweeps: int
    flags: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)


def _reduce_kronecker(
    theta_block: np.ndarray,
    core: np.ndarray,
    receive_offsets: np.ndarray,
    transmit_offsets: np.ndarray,
) -> np.ndarray:
    """
    Sum of the N_E x N_E sub-blocks of A^H (Theta_g^T kron core) B, where A and
    B are the block-diagonal offset phase matrices of the receive and transmit
    sides.
    """
    num_offsets = theta_block.shape[0]
    num_receive, num_transmit = core.shape
    expanded = np.kron(theta_block.T, core)
    left = receive_offsets.T.reshape(-1).conj()
    right = transmit_offsets.T.reshape(-1)
    phased = left[:, None] * expanded * right[None, :]
    return phased.reshape(num_offsets, num_receive, num_offsets, num_transmit).sum(
        axis=(0, 2)
    )


def build_coefficients(
    env: PathEnvironment,
    channels: ChannelSet,
    theta: ScatteringMatrix,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
    geometry: SystemGeometry,
    g: int,
) -> PlacementCoefficients:
    wavelength = geometry.wavelength
    offsets = geometry.intra_group_offsets
    theta_block = theta.blocks[g]
    num_users = W.shape[1]

    receive_offsets = field_response_matrix(offsets, env.bs_ris_arrival, wavelength)
    bs_transmit = field_response_matrix(
        geometry.bs_positions, env.bs_ris_departure, wavelength
    )
    # Column k' is Sigma_br G(b) w_k'
    incident = env.prm_bs_ris @ bs_transmit @ W

    num_receive = env.bs_ris_arrival.count
    num_transmit = env.ris_ue_departure[0].count
    C = np.zeros((num_users, num_users, num_receive, num_transmit), dtype=complex)
    for k in range(num_users):
        prm = env.prm_ris_ue[k]
        outgoing = prm.conj().T @ np.ones(prm.shape[0])
        transmit_offsets = field_response_matrix(
            offsets, env.ris_ue_departure[k], wavelength
        )
        for k_prime in range(num_users):
            core = np.conj(psi[k]) * np.outer(incident[:, k_prime], outgoing.conj())
            C[k, k_prime] = _reduce_kronecker(
                theta_block, core, receive_offsets, transmit_offsets
            )

    D = np.sqrt(1.0 + rho)[:, None, None] * C[np.arange(num_users), np.arange(num_users)]

    span = slice(g * geometry.group_size, (g + 1) * geometry.group_size)
    HW = channels.bs_ris @ W
    full = channels.ris_ue.conj().T @ (theta.full() @ HW)
    own = channels.ris_ue[span].conj().T @ (theta_block @ HW[span])
    cross = np.conj(np.conj(psi)[:, None] * (full - own))

    E = D - np.einsum("kj,kjqp->kqp", cross, C)

    scale = 2.0 * np.pi / wavelength
    return PlacementCoefficients(
        group=g,
        C=C,
        D=D,
        E=E,
        cross=cross,
        receive_wavevectors=scale * env.bs_ris_arrival.projections(),
        transmit_wavevectors=scale
        * np.stack([angles.projections() for angles in env.ris_ue_departure]),
        wavelength=wavelength,
    )


def mu(coeffs: PlacementCoefficients, c: np.ndarray) -> float:
    phasors = np.exp(1j * coeffs.phases(c))
    coupling = np.einsum("kjqp,kqp->kj", coeffs.C, phasors)
    direct = np.einsum("kqp,kqp->k", coeffs.E, phasors)
    return float(-np.sum(np.abs(coupling) ** 2) + 2.0 * np.sum(direct.real))


def mu_cosine_expansion(coeffs: PlacementCoefficients, c: np.ndarray) -> float:
    """Same value as `mu` from the amplitude/phase sum over pairs of path terms"""
    phases = coeffs.phases(c)
    total = 0.0
    for k in range(coeffs.num_users):
        for k_prime in range(coeffs.num_users):
            term = coeffs.C[k, k_prime].reshape(-1)
            angle = phases[k].reshape(-1) + np.angle(term)
            amplitude = np.abs(term)
            total -= np.sum(
                np.outer(amplitude, amplitude)
                * np.cos(angle[:, None] - angle[None, :])
            )
        amplitude = np.abs(coeffs.E[k])
        total += 2.0 * np.sum(amplitude * np.cos(phases[k] + np.angle(coeffs.E[k])))
    return float(total)


def gradient_mu(coeffs: PlacementCoefficients, c: np.ndarray) -> np.ndarray:
    phasors = np.exp(1j * coeffs.phases(c))
    gradients = coeffs.phase_gradients()

    coupling = np.einsum("kjqp,kqp->kj", coeffs.C, phasors)
    coupling_grad = 1j * np.einsum("kjqp,kqp,kqpd->kjd", coeffs.C, phasors, gradients)
    direct_grad = 1j * np.einsum("kqp,kqp,kqpd->d", coeffs.E, phasors, gradients)

    quadratic = -2.0 * np.real(np.einsum("kj,kjd->d", coupling.conj(), coupling_grad))
    return quadratic + 2.0 * direct_grad.real


def curvature_bound(coeffs: PlacementCoefficients) -> float:
    """(8 pi^2 / lambda^2) (sum_kk' (sum |C_kk'|)^2 + 2 sum_k sum |E_k|)"""
    coupling = np.sum(np.abs(coeffs.C), axis=(2, 3))
    direct = np.sum(np.abs(coeffs.E))
    return float(
        8.0 * np.pi**2 / coeffs.wavelength**2 * (np.sum(coupling**2) + 2.0 * direct)
    )


def hessian_bound(coeffs: PlacementCoefficients) -> float:
    """
    Bound on the Hessian spectral norm from the actual phase gradients.

    For |z|^2 with z = sum_a w_a e^{j phi_a} and grad phi_a = G_a the Hessian
    norm never exceeds sum_ab w_a w_b |G_a - G_b|^2, which expands to
    2 (sum w)(sum w |G|^2) - 2 |sum w G|^2. The 2 Re{e e^{j phi}} terms add
    2 |e| |G|^2 each.
    """
    gradients = coeffs.phase_gradients().reshape(coeffs.num_users, -1, 2)
    squared = np.sum(gradients**2, axis=-1)
    total = 0.0
    for k in range(coeffs.num_users):
        for k_prime in range(coeffs.num_users):
            weights = np.abs(coeffs.C[k, k_prime]).reshape(-1)
            mean_direction = weights @ gradients[k]
            total += 2.0 * np.sum(weights) * (weights @ squared[k])
            total -= 2.0 * mean_direction @ mean_direction
        total += 2.0 * np.abs(coeffs.E[k]).reshape(-1) @ squared[k]
    return float(max(total, 0.0))


def surrogate(coeffs: PlacementCoefficients, c: np.ndarray) -> SurrogateModel:
    c = np.asarray(c, dtype=float)
    return SurrogateModel(
        gradient=gradient_mu(coeffs, c),
        curvature=max(curvature_bound(coeffs), hessian_bound(coeffs)),
        expansion_point=c,
        value=mu(coeffs, c),
    )


def feasible_halfplanes(
    geometry: SystemGeometry, g: int, expansion_point: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | None:
    """
    Rows of (normals, bounds) describe normals @ c <= bounds: the reference box
    followed by one linearized spacing constraint per other group. None when a
    spacing constraint cannot be linearized (coincident reference points).
    """
    box = geometry.reference_box()
    normals = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]]
    bounds = [-box.x_min, box.x_max, -box.y_min, box.y_max]

    for other in range(geometry.num_groups):
        if other == g:
            continue
        anchor = geometry.group_refs[other]
        direction = expansion_point - anchor
        distance = np.linalg.norm(direction)
        if distance == 0.0:
            return None
        unit = direction / distance
        normals.append(list(-unit))
        bounds.append(-geometry.min_spacing - unit @ anchor)

    return np.array(normals), np.array(bounds)


def project_onto_polygon(
    target: np.ndarray,
    normals: np.ndarray,
    bounds: np.ndarray,
    tol: float = 1e-12,
    feasible_point: np.ndarray | None = None,
) -> np.ndarray | None:
    """
    Euclidean projection of target onto {c : normals @ c <= bounds} by
    enumerating the edge projections and the vertices.

    With a feasible_point the projection lies within |target - feasible_point|
    of target, so constraints whose boundary is farther away are never active
    and are left out of the enumeration.
    """
    target = np.asarray(target, dtype=float)
    slack = tol * (1.0 + np.abs(bounds))
    excess = normals @ target - bounds
    if np.all(excess <= slack):
        return target

    normal_norms = np.linalg.norm(normals, axis=1)
    active = np.ones(len(bounds), dtype=bool)
    if feasible_point is not None:
        feasible_point = np.asarray(feasible_point, dtype=float)
        if np.all(normals @ feasible_point <= bounds + slack):
            radius = np.linalg.norm(target - feasible_point)
            active = excess >= -radius * normal_norms - slack
    normals_kept, bounds_kept = normals[active], bounds[active]

    edges = target - (
        (normals_kept @ target - bounds_kept) / normal_norms[active] ** 2
    )[:, None] * normals_kept

    first, second = np.triu_indices(len(bounds_kept), k=1)
    a, b = normals_kept[first], normals_kept[second]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    solvable = np.abs(det) >= 1e-14
    a, b, det = a[solvable], b[solvable], det[solvable]
    a_bound, b_bound = bounds_kept[first[solvable]], bounds_kept[second[solvable]]
    vertices = np.column_stack(
        [
            (a_bound * b[:, 1] - b_bound * a[:, 1]) / det,
            (a[:, 0] * b_bound - b[:, 0] * a_bound) / det,
        ]
    )

    candidates = np.vstack([edges, vertices])
    inside = np.all(candidates @ normals.T <= bounds + slack, axis=1)
    if not np.any(inside):
        return None
    candidates = candidates[inside]
    return candidates[np.argmin(np.linalg.norm(candidates - target, axis=1))]


def sca_group_step(
    coeffs: PlacementCoefficients,
    current: np.ndarray,
    geometry: SystemGeometry,
    g: int,
) -> PlacementStep:
    current = np.asarray(current, dtype=float)
    model = surrogate(coeffs, current)
    if model.curvature <= 0.0 or not np.any(model.gradient):
        return PlacementStep(point=current)

    constraints = feasible_halfplanes(geometry, g, current)
    if constraints is None:
        return PlacementStep(point=current, flag="placement_infeasible")

    target = current + model.gradient / model.curvature
    point = project_onto_polygon(target, *constraints, feasible_point=current)
    if point is None:
        logger.warning(f"Linearized placement problem for group {g} is infeasible")
        return PlacementStep(point=current, flag="placement_infeasible")

    if mu(coeffs, point) < model.value - MINORIZATION_SLACK:
        logger.warning(f"Placement step for group {g} lowered the objective")
        return PlacementStep(point=current, flag="placement_rejected")

    return PlacementStep(point=point)


def placement_objective(
    channels: ChannelSet,
    theta: np.ndarray,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
) -> float:
    """Position-dependent part of the FP objective: 2 sqrt(1+rho) Re{psi* x_kk} - |psi|^2 sum_i |x_ki|^2"""
    gains = channels.ris_ue.conj().T @ theta @ channels.bs_ris @ W
    linear = 2.0 * np.sqrt(1.0 + rho) * np.real(np.conj(psi) * np.diag(gains))
    quadratic = np.abs(psi) ** 2 * np.sum(np.abs(gains) ** 2, axis=1)
    return float(np.sum(linear - quadratic))


def optimize_positions(
    provider: ChannelProvider,
    channels: ChannelSet,
    geometry: SystemGeometry,
    theta: ScatteringMatrix,
    W: np.ndarray,
    rho: np.ndarray,
    psi: np.ndarray,
    config: SolverConfig,
    mobility: Mobility = "MA",
) -> PlacementResult:
    """Round-robin SCA over groups in ascending order until positions settle"""
    if mobility == "FA":
        return PlacementResult(geometry=geometry, channels=channels, sweeps=0)

    env = provider.environment
    theta_full = theta.full()
    tol = config.tol_pos_wavelengths * geometry.wavelength
    result = PlacementResult(
        geometry=geometry,
        channels=channels,
        sweeps=0,
        objective_trace=[placement_objective(channels, theta_full, W, rho, psi)],
    )

    for sweep in range(config.max_sca):
        largest_move = 0.0
        for g in range(geometry.num_groups):
            coeffs = build_coefficients(
                env, channels, theta, W, rho, psi, geometry, g
            )
            previous = geometry.group_refs[g]
            step = sca_group_step(coeffs, previous, geometry, g)
            if step.flag is not None and step.flag not in result.flags:
                result.flags.append(step.flag)

            move = float(np.linalg.norm(step.point - previous))
            if move > 0.0:
                refs = geometry.group_refs.copy()
                refs[g] = step.point
                geometry = geometry.with_refs(refs)
                channels = provider.refresh_group(channels, geometry, g)
            largest_move = max(largest_move, move)

        result.sweeps = sweep + 1
        result.objective_trace.append(
            placement_objective(channels, theta_full, W, rho, psi)
        )
        logger.debug(f"Placement sweep {sweep + 1}: largest move {largest_move:.3e} m")
        if largest_move < tol:
            break

    geometry.validate()
    result.geometry = geometry
    result.channels = channels
    return result
