"""
Numerical self-checks of the optimizer building blocks on random instances.
Every check reports a normalized worst error against a fixed tolerance.
"""

import asyncio
import numpy as np
from dataclasses import dataclass
from typing import List
from pydantic import BaseModel
from admm_scattering import assemble_linear_map
from bdris_core import (
    AdmittanceMatrix,
    RisArchitecture,
    ScatteringMatrix,
    admittance_to_scattering,
    upper_triangular_pack,
    validate_scattering,
)
from beamforming import solve_beamformer
from channel_model import (
    ChannelSet,
    PathEnvironment,
    SystemGeometry,
    fixed_layout_geometry,
    place_users,
    sample_environment,
)
from channel_provider import FieldResponseChannelProvider
from experiment_manager import ScenarioParams
from fp_solver import fp_objective, sum_rate, update_auxiliaries
from placement_sca import (
    build_coefficients,
    gradient_mu,
    mu,
    placement_objective,
    surrogate,
)


@dataclass
class RandomInstance:
    arch: RisArchitecture
    geometry: SystemGeometry
    env: PathEnvironment
    provider: FieldResponseChannelProvider
    channels: ChannelSet
    admittance: AdmittanceMatrix
    theta: ScatteringMatrix
    W: np.ndarray
    rho: np.ndarray
    psi: np.ndarray


class SelftestCheck(BaseModel):
    name: str
    instances: int
    worst_error: float
    tolerance: float
    passed: bool

    def __str__(self) -> str:
        status = "ok" if self.passed else "FAILED"
        return (
            f"{self.name}: {status} (worst {self.worst_error:.2e}, "
            f"tolerance {self.tolerance:.0e}, {self.instances} instances)"
        )


class SelftestResponse(BaseModel):
    seed: int
    checks: List[SelftestCheck]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def __str__(self) -> str:
        header = "All checks passed" if self.passed else "Some checks failed"
        return "\n".join([f"{header} (seed {self.seed})"] + [str(c) for c in self.checks])


def random_admittance(
    arch: RisArchitecture, rng: np.random.Generator, reference_impedance: float = 50.0
) -> AdmittanceMatrix:
    """Symmetric blocks with Z0 B of order one"""
    blocks = []
    for _ in range(arch.num_groups):
        raw = rng.standard_normal((arch.group_size, arch.group_size))
        blocks.append((raw + raw.T) / (2.0 * reference_impedance))
    return AdmittanceMatrix(blocks=tuple(blocks), reference_impedance=reference_impedance)


def random_beamformer(
    num_antennas: int, num_users: int, power: float, rng: np.random.Generator
) -> np.ndarray:
    W = rng.standard_normal((num_antennas, num_users)) + 1j * rng.standard_normal(
        (num_antennas, num_users)
    )
    return W * np.sqrt(power) / np.linalg.norm(W)


def random_instance(
    rng: np.random.Generator,
    num_elements: int = 8,
    group_size: int = 2,
    num_antennas: int = 4,
    num_paths: int = 4,
    area_scale: float = 2.0,
    scenario: ScenarioParams | None = None,
) -> RandomInstance:
    scenario = scenario or ScenarioParams()
    arch = RisArchitecture.from_group_size(num_elements, group_size)
    ue_positions = place_users(scenario.num_users, scenario.ris_ue_radius, rng)
    env = sample_environment(scenario, num_paths, rng.integers(2**32), ue_positions)
    geometry = fixed_layout_geometry(
        num_elements, group_size, num_antennas, area_scale, ue_positions, scenario
    )
    provider = FieldResponseChannelProvider(env, scenario.noise_power)
    channels = provider.build(geometry)
    admittance = random_admittance(arch, rng, scenario.reference_impedance)
    theta = admittance_to_scattering(admittance)
    W = random_beamformer(num_antennas, scenario.num_users, scenario.power_watts, rng)
    rho, psi = update_auxiliaries(channels, theta.full(), W)
    return RandomInstance(
        arch=arch,
        geometry=geometry,
        env=env,
        provider=provider,
        channels=channels,
        admittance=admittance,
        theta=theta,
        W=W,
        rho=rho,
        psi=psi,
    )


def random_reference_point(
    geometry: SystemGeometry, rng: np.random.Generator
) -> np.ndarray:
    box = geometry.reference_box()
    return np.array(
        [rng.uniform(box.x_min, box.x_max), rng.uniform(box.y_min, box.y_max)]
    )


def direct_group_objective(
    instance: RandomInstance, g: int, point: np.ndarray
) -> float:
    """Position-dependent FP objective with group g moved to point"""
    refs = instance.geometry.group_refs.copy()
    refs[g] = point
    geometry = instance.geometry.with_refs(refs)
    channels = instance.provider.refresh_group(instance.channels, geometry, g)
    return placement_objective(
        channels, instance.theta.full(), instance.W, instance.rho, instance.psi
    )


def _check(name: str, errors: List[float], tolerance: float) -> SelftestCheck:
    worst = float(max(errors)) if errors else 0.0
    return SelftestCheck(
        name=name,
        instances=len(errors),
        worst_error=worst,
        tolerance=tolerance,
        passed=worst <= tolerance,
    )


def check_scattering(rng: np.random.Generator, instances: int) -> List[SelftestCheck]:
    unitarity, symmetry = [], []
    for i in range(instances):
        group_size = [1, 2, 4, 8][i % 4]
        arch = RisArchitecture.from_group_size(8, group_size)
        report = validate_scattering(
            admittance_to_scattering(random_admittance(arch, rng)), arch
        )
        unitarity.append(report.unitarity)
        symmetry.append(report.symmetry)
    return [
        _check("scattering_unitarity", unitarity, 1e-8),
        _check("scattering_symmetry", symmetry, 1e-10),
    ]


def check_fp_identity(rng: np.random.Generator, instances: int) -> SelftestCheck:
    errors = []
    for _ in range(instances):
        instance = random_instance(rng)
        theta = instance.theta.full()
        rate = sum_rate(instance.channels, theta, instance.W)
        value = fp_objective(
            instance.channels, theta, instance.W, instance.rho, instance.psi
        )
        errors.append(abs(value - rate) / max(abs(rate), np.finfo(float).tiny))
    return _check("fp_identity", errors, 1e-9)


def check_beamformer(rng: np.random.Generator, instances: int) -> SelftestCheck:
    errors = []
    for _ in range(instances):
        G = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        Q = G @ G.conj().T
        q = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        budget = 1e-3
        solution = solve_beamformer(Q, q, budget)
        excess = max(solution.power - budget, 0.0) / budget
        slackness = (
            abs(solution.power - budget) / budget if solution.multiplier > 0 else 0.0
        )
        errors.append(max(excess, slackness))
    return _check("beamformer_kkt", errors, 1e-6)


def check_vectorization(rng: np.random.Generator, instances: int) -> SelftestCheck:
    errors = []
    for i in range(instances):
        group_size = [1, 2, 4, 8][i % 4]
        arch = RisArchitecture.from_group_size(8, group_size)
        B = random_admittance(arch, rng, reference_impedance=1.0)
        M_mat = rng.standard_normal((arch.total, 4))
        Gamma = rng.standard_normal((arch.total, 4))
        A, b_vec = assemble_linear_map(M_mat, Gamma, arch)
        packed = np.sum((A @ upper_triangular_pack(B) - b_vec) ** 2)
        direct = np.sum((B.full() @ M_mat - Gamma) ** 2)
        errors.append(abs(packed - direct) / (1.0 + direct))
    return _check("vectorization", errors, 1e-10)


def check_placement(
    rng: np.random.Generator, instances: int, samples: int = 10
) -> List[SelftestCheck]:
    offsets, gradients, minorization = [], [], []
    for _ in range(instances):
        instance = random_instance(rng)
        g = int(rng.integers(instance.arch.num_groups))
        coeffs = build_coefficients(
            instance.env,
            instance.channels,
            instance.theta,
            instance.W,
            instance.rho,
            instance.psi,
            instance.geometry,
            g,
        )

        differences, values = [], []
        for _ in range(samples):
            point = random_reference_point(instance.geometry, rng)
            direct = direct_group_objective(instance, g, point)
            differences.append(mu(coeffs, point) - direct)
            values.append(abs(direct))
        offsets.append(np.ptp(differences) / (1.0 + max(values)))

        point = random_reference_point(instance.geometry, rng)
        step = 1e-6 * instance.geometry.wavelength
        numeric = np.array(
            [
                (mu(coeffs, point + step * e) - mu(coeffs, point - step * e))
                / (2.0 * step)
                for e in np.eye(2)
            ]
        )
        analytic = gradient_mu(coeffs, point)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        gradients.append(np.linalg.norm(analytic - numeric) / scale)

        model = surrogate(coeffs, instance.geometry.group_refs[g])
        for _ in range(samples):
            point = random_reference_point(instance.geometry, rng)
            exact = mu(coeffs, point)
            minorization.append(
                max(model.evaluate(point) - exact, 0.0) / (1.0 + abs(exact))
            )

    return [
        _check("placement_constant_offset", offsets, 1e-8),
        _check("placement_gradient", gradients, 1e-4),
        _check("placement_minorization", minorization, 1e-9),
    ]


def run_checks(seed: int = 0, instances: int = 5) -> SelftestResponse:
    rng = np.random.default_rng(seed)
    checks = check_scattering(rng, instances)
    checks.append(check_fp_identity(rng, instances))
    checks.append(check_beamformer(rng, instances))
    checks.append(check_vectorization(rng, instances))
    checks.extend(check_placement(rng, instances))
    return SelftestResponse(seed=seed, checks=checks)


async def selftest(seed: int = 0, instances: int = 5) -> SelftestResponse:
    """Run the numerical self-checks"""
    if instances < 1:
        raise ValueError("instances must be at least 1")
    loop = asyncio.get_event_loop()
    return await loop.run_in_executor(None, run_checks, seed, instances)
