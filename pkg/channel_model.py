"""
Field-response channel model for the BS -> RIS -> UE links.

Positions are 2-D coordinates in meters. Every group of the RIS is a rigid
sub-panel described by a reference point plus fixed offsets, so moving a
group only changes its own rows of the BS->RIS channel and its own entries
of the RIS->UE channels.
"""

import logging
import numpy as np
from dataclasses import dataclass, replace
from experiment_manager import ConfigurationError, ScenarioParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathAngles:
    azimuth: np.ndarray
    elevation: np.ndarray

    def __post_init__(self):
        if self.azimuth.shape != self.elevation.shape or self.azimuth.ndim != 1:
            raise ConfigurationError(
                "Azimuth and elevation must be 1-D arrays of equal length"
            )

    @property
    def count(self) -> int:
        return self.azimuth.shape[0]

    def projections(self) -> np.ndarray:
        """(L, 2) direction cosines so that rho_p(x, y) = row_p . (x, y)"""
        return np.stack(
            [np.sin(self.azimuth) * np.cos(self.elevation), np.sin(self.elevation)],
            axis=1,
        )


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> bool:
        points = np.atleast_2d(points)
        return bool(
            np.all(points[:, 0] >= self.x_min - tol)
            and np.all(points[:, 0] <= self.x_max + tol)
            and np.all(points[:, 1] >= self.y_min - tol)
            and np.all(points[:, 1] <= self.y_max + tol)
        )


@dataclass(frozen=True)
class SystemGeometry:
    bs_positions: np.ndarray
    group_refs: np.ndarray
    intra_group_offsets: np.ndarray
    ue_positions: np.ndarray
    region: Region
    min_spacing: float
    wavelength: float
    bs_ris_distance: float
    ris_ue_radius: float

    @property
    def num_groups(self) -> int:
        return self.group_refs.shape[0]

    @property
    def group_size(self) -> int:
        return self.intra_group_offsets.shape[0]

    @property
    def num_elements(self) -> int:
        return self.num_groups * self.group_size

    @property
    def num_antennas(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.ue_positions.shape[0]

    def element_positions(self) -> np.ndarray:
        """(N_G, N_E, 2) array of t_{g,m} = c_g + delta_m"""
        return self.group_refs[:, None, :] + self.intra_group_offsets[None, :, :]

    def reference_box(self) -> Region:
        """Region for reference points that keeps every element inside `region`"""
        offsets = self.intra_group_offsets
        return Region(
            x_min=self.region.x_min - offsets[:, 0].min(),
            x_max=self.region.x_max - offsets[:, 0].max(),
            y_min=self.region.y_min - offsets[:, 1].min(),
            y_max=self.region.y_max - offsets[:, 1].max(),
        )

    def with_refs(self, group_refs: np.ndarray) -> "SystemGeometry":
        return replace(self, group_refs=np.array(group_refs, dtype=float))

    def min_group_distance(self) -> float:
        if self.num_groups < 2:
            return np.inf
        diffs = self.group_refs[:, None, :] - self.group_refs[None, :, :]
        distances = np.linalg.norm(diffs, axis=-1)
        distances[np.diag_indices(self.num_groups)] = np.inf
        return float(distances.min())

    def validate(self, tol: float = 1e-9):
        if not self.region.contains(self.element_positions().reshape(-1, 2), tol):
            raise ConfigurationError("RIS elements must lie inside the moving region")
        if self.min_group_distance() < self.min_spacing - tol:
            raise ConfigurationError(
                f"Groups closer than the minimum spacing {self.min_spacing}"
            )


@dataclass(frozen=True)
class PathEnvironment:
    bs_ris_departure: PathAngles
    bs_ris_arrival: PathAngles
    ris_ue_departure: tuple
    prm_bs_ris: np.ndarray
    prm_ris_ue: tuple
    rician_factor: float
    pathloss_gain: float
    pathloss_exponent: float

    @property
    def num_users(self) -> int:
        return len(self.ris_ue_departure)


@dataclass(frozen=True)
class ChannelSet:
    bs_ris: np.ndarray
    ris_ue: np.ndarray
    noise_power: float

    @property
    def num_elements(self) -> int:
        return self.bs_ris.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.bs_ris.shape[1]

    @property
    def num_users(self) -> int:
        return self.ris_ue.shape[1]

    def with_group(
        self, span: slice, bs_ris_block: np.ndarray, ris_ue_block: np.ndarray
    ) -> "ChannelSet":
        bs_ris = self.bs_ris.copy()
        ris_ue = self.ris_ue.copy()
        bs_ris[span] = bs_ris_block
        ris_ue[span] = ris_ue_block
        return replace(self, bs_ris=bs_ris, ris_ue=ris_ue)


def field_response_matrix(
    positions: np.ndarray, angles: PathAngles, wavelength: float
) -> np.ndarray:
    """L x N matrix whose column n is the FRV of positions[n]"""
    positions = np.atleast_2d(positions)
    phase = (2.0 * np.pi / wavelength) * (angles.projections() @ positions.T)
    return np.exp(1j * phase)


def frv_transmit(
    position: np.ndarray, angles: PathAngles, wavelength: float
) -> np.ndarray:
    return field_response_matrix(np.asarray(position, dtype=float), angles, wavelength)[
        :, 0
    ]


def frm_receive_group(
    ref_point: np.ndarray,
    offsets: np.ndarray,
    angles: PathAngles,
    wavelength: float,
) -> np.ndarray:
    return field_response_matrix(
        np.asarray(ref_point, dtype=float)[None, :] + offsets, angles, wavelength
    )


def _check_dimensions(geometry: SystemGeometry, env: PathEnvironment):
    expected = (env.bs_ris_arrival.count, env.bs_ris_departure.count)
    if env.prm_bs_ris.shape != expected:
        raise ConfigurationError(
            f"BS-RIS path response shape {env.prm_bs_ris.shape} does not match {expected}"
        )
    if env.num_users != geometry.num_users or len(env.prm_ris_ue) != env.num_users:
        raise ConfigurationError(
            f"Environment describes {env.num_users} users, geometry has {geometry.num_users}"
        )
    for angles, prm in zip(env.ris_ue_departure, env.prm_ris_ue):
        if prm.shape[1] != angles.count:
            raise ConfigurationError(
                f"RIS-UE path response shape {prm.shape} does not match {angles.count} paths"
            )


def group_bs_ris_block(
    geometry: SystemGeometry, env: PathEnvironment, g: int
) -> np.ndarray:
    """H_g(c_g) = F^H(c_g) Sigma_br G(b)"""
    receive = frm_receive_group(
        geometry.group_refs[g],
        geometry.intra_group_offsets,
        env.bs_ris_arrival,
        geometry.wavelength,
    )
    transmit = field_response_matrix(
        geometry.bs_positions, env.bs_ris_departure, geometry.wavelength
    )
    return receive.conj().T @ env.prm_bs_ris @ transmit


def group_ris_ue_block(
    geometry: SystemGeometry, env: PathEnvironment, k: int, g: int
) -> np.ndarray:
    """h_{k,g}(c_g) = G_k(c_g)^H Sigma_k^H 1"""
    transmit = frm_receive_group(
        geometry.group_refs[g],
        geometry.intra_group_offsets,
        env.ris_ue_departure[k],
        geometry.wavelength,
    )
    prm = env.prm_ris_ue[k]
    return transmit.conj().T @ prm.conj().T @ np.ones(prm.shape[0])


def assemble_bs_ris_channel(
    geometry: SystemGeometry, env: PathEnvironment
) -> np.ndarray:
    _check_dimensions(geometry, env)
    return np.vstack(
        [group_bs_ris_block(geometry, env, g) for g in range(geometry.num_groups)]
    )


def assemble_ris_ue_channel(
    geometry: SystemGeometry, env: PathEnvironment, ue_index: int
) -> np.ndarray:
    _check_dimensions(geometry, env)
    return np.concatenate(
        [
            group_ris_ue_block(geometry, env, ue_index, g)
            for g in range(geometry.num_groups)
        ]
    )


def build_channels(
    geometry: SystemGeometry, env: PathEnvironment, noise_power: float
) -> ChannelSet:
    ris_ue = np.stack(
        [assemble_ris_ue_channel(geometry, env, k) for k in range(geometry.num_users)],
        axis=1,
    )
    return ChannelSet(
        bs_ris=assemble_bs_ris_channel(geometry, env),
        ris_ue=ris_ue,
        noise_power=noise_power,
    )


def refresh_group(
    channels: ChannelSet, geometry: SystemGeometry, env: PathEnvironment, g: int
) -> ChannelSet:
    """Recompute only the rows that belong to group g"""
    ris_ue_block = np.stack(
        [group_ris_ue_block(geometry, env, k, g) for k in range(geometry.num_users)],
        axis=1,
    )
    span = slice(g * geometry.group_size, (g + 1) * geometry.group_size)
    return channels.with_group(
        span, group_bs_ris_block(geometry, env, g), ris_ue_block
    )


def linear_offsets(count: int, wavelength: float) -> np.ndarray:
    """Half-wavelength spaced points along x, starting at the origin"""
    offsets = np.zeros((count, 2))
    offsets[:, 0] = np.arange(count) * wavelength / 2.0
    return offsets


def fixed_layout_geometry(
    num_elements: int,
    group_size: int,
    num_antennas: int,
    area_scale: float,
    ue_positions: np.ndarray,
    scenario: ScenarioParams,
) -> SystemGeometry:
    """
    Fixed-antenna layout: groups abut along x from the left edge of the moving
    region at the vertical center, i.e. a contiguous half-wavelength array.
    """
    if num_elements % group_size != 0:
        raise ConfigurationError(
            f"{num_elements} elements cannot be split into groups of {group_size}"
        )
    wavelength = scenario.wavelength
    num_groups = num_elements // group_size
    spacing = scenario.spacing_for(group_size)

    fixed_length = max(num_elements - 1, 1) * wavelength / 2.0
    region = Region(
        x_min=0.0,
        x_max=area_scale * fixed_length,
        y_min=0.0,
        y_max=scenario.region_width_wavelengths * wavelength,
    )

    refs = np.zeros((num_groups, 2))
    refs[:, 0] = np.arange(num_groups) * spacing
    refs[:, 1] = region.height / 2.0

    geometry = SystemGeometry(
        bs_positions=linear_offsets(num_antennas, wavelength),
        group_refs=refs,
        intra_group_offsets=linear_offsets(group_size, wavelength),
        ue_positions=np.asarray(ue_positions, dtype=float),
        region=region,
        min_spacing=spacing,
        wavelength=wavelength,
        bs_ris_distance=scenario.bs_ris_distance,
        ris_ue_radius=scenario.ris_ue_radius,
    )
    geometry.validate()
    return geometry


def pathloss(distance: float, gain: float, exponent: float) -> float:
    """eta(d) = gamma0 d^-alpha"""
    return gain * distance ** (-exponent)


def place_users(
    num_users: int, radius: float, rng: np.random.Generator
) -> np.ndarray:
    """Uniform positions in the disc of the given radius around the RIS"""
    distances = radius * np.sqrt(rng.uniform(size=num_users))
    bearings = rng.uniform(0.0, 2.0 * np.pi, size=num_users)
    return np.stack(
        [distances * np.cos(bearings), distances * np.sin(bearings)], axis=1
    )


def _complex_normal(
    variances: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    scale = np.sqrt(variances / 2.0)
    return scale * (
        rng.standard_normal(variances.shape) + 1j * rng.standard_normal(variances.shape)
    )


def rician_path_variances(num_paths: int, rician_factor: float) -> np.ndarray:
    """LoS share kappa/(kappa+1) on path 1, the rest split over the NLoS paths"""
    if num_paths == 1:
        # No NLoS path to carry the diffuse share
        return np.ones(1)
    if np.isinf(rician_factor):
        return np.concatenate([[1.0], np.zeros(num_paths - 1)])
    los = rician_factor / (rician_factor + 1.0)
    nlos = 1.0 / ((rician_factor + 1.0) * (num_paths - 1))
    return np.concatenate([[los], np.full(num_paths - 1, nlos)])


def sample_angles(num_paths: int, rng: np.random.Generator) -> PathAngles:
    return PathAngles(
        azimuth=rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=num_paths),
        elevation=rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=num_paths),
    )


def sample_environment(
    params: ScenarioParams,
    num_paths: int,
    rng_seed: int | np.random.SeedSequence,
    ue_positions: np.ndarray,
) -> PathEnvironment:
    """Diagonal Rician path responses scaled by sqrt(eta(d)) with uniform angles"""
    if num_paths < 1:
        raise ConfigurationError("num_paths must be at least 1")
    rng = np.random.default_rng(rng_seed)
    variances = rician_path_variances(num_paths, params.rician_factor)
    gain = params.pathloss_gain
    exponent = params.pathloss_exponent

    bs_ris_departure = sample_angles(num_paths, rng)
    bs_ris_arrival = sample_angles(num_paths, rng)
    bs_ris_scale = np.sqrt(pathloss(params.bs_ris_distance, gain, exponent))
    prm_bs_ris = bs_ris_scale * np.diag(_complex_normal(variances, rng))

    ue_positions = np.atleast_2d(ue_positions)
    ris_ue_departure = []
    prm_ris_ue = []
    for position in ue_positions:
        distance = max(float(np.linalg.norm(position)), params.ue_distance_floor)
        ris_ue_departure.append(sample_angles(num_paths, rng))
        scale = np.sqrt(pathloss(distance, gain, exponent))
        prm_ris_ue.append(scale * np.diag(_complex_normal(variances, rng)))

    logger.debug(
        f"Sampled environment with L={num_paths} for {len(prm_ris_ue)} users"
    )
    return PathEnvironment(
        bs_ris_departure=bs_ris_departure,
        bs_ris_arrival=bs_ris_arrival,
        ris_ue_departure=tuple(ris_ue_departure),
        prm_bs_ris=prm_bs_ris,
        prm_ris_ue=tuple(prm_ris_ue),
        rician_factor=params.rician_factor,
        pathloss_gain=gain,
        pathloss_exponent=exponent,
    )
