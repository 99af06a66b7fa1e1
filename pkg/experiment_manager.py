import yaml
import itertools
from typing import Dict, List, Literal, Iterator
from pydantic import BaseModel, ConfigDict, Field, model_validator
from bdris_core import RisArchitecture, ArchitectureError


class ConfigurationError(Exception):
    pass


class ExperimentNotFoundError(Exception):
    pass


Mobility = Literal["MA", "FA"]


class ScenarioParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_users: int = 2
    bs_ris_distance: float = 50.0
    ris_ue_radius: float = 2.0
    ue_distance_floor: float = 0.5
    rician_factor: float = 1.0
    pathloss_db_at_1m: float = -30.0
    pathloss_exponent: float = 2.2
    noise_power_dbm: float = -80.0
    wavelength: float = 0.01
    region_width_wavelengths: float = 4.0
    power_dbm: float = 10.0
    reference_impedance: float = 50.0

    # Defaults to N_E * wavelength / 2 when unset
    min_spacing: float | None = None

    @model_validator(mode="after")
    def validate_scenario(self):
        if self.num_users < 1:
            raise ConfigurationError("num_users must be at least 1")
        if self.wavelength <= 0:
            raise ConfigurationError("wavelength must be positive")
        if self.rician_factor < 0:
            raise ConfigurationError("rician_factor must be non-negative")
        if self.bs_ris_distance <= 0 or self.ris_ue_radius <= 0:
            raise ConfigurationError("link distances must be positive")
        if self.reference_impedance <= 0:
            raise ConfigurationError("reference_impedance must be positive")
        if self.min_spacing is not None and self.min_spacing < 0:
            raise ConfigurationError("min_spacing must be non-negative")
        return self

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def power_watts(self) -> float:
        return dbm_to_watts(self.power_dbm)

    @property
    def pathloss_gain(self) -> float:
        return 10.0 ** (self.pathloss_db_at_1m / 10.0)

    def spacing_for(self, group_size: int) -> float:
        if self.min_spacing is not None:
            return self.min_spacing
        return group_size * self.wavelength / 2.0


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    penalty: float = 0.5
    proximal: float = 0.1
    tol_outer: float = 1e-4
    max_outer: int = 100
    tol_admm: float = 1e-5
    max_admm: int = 300
    tol_pos_wavelengths: float = 1e-4
    max_sca: int = 20
    accept_slack: float = 1e-8
    bisection_tol: float = 1e-6
    max_bisection: int = 200
    # Points per axis of the coarse MA start grid; 0 starts from the given layout
    placement_grid: int = 0

    @model_validator(mode="after")
    def validate_solver(self):
        if self.penalty <= 0:
            raise ConfigurationError("penalty must be positive")
        if self.proximal < 0:
            raise ConfigurationError("proximal must be non-negative")
        if min(self.max_outer, self.max_admm, self.max_sca, self.max_bisection) < 0:
            raise ConfigurationError("iteration limits must be non-negative")
        if self.placement_grid < 0:
            raise ConfigurationError("placement_grid must be non-negative")
        return self


class SweepPoint(BaseModel):
    point_id: int
    scenario_id: int
    num_elements: int
    num_antennas: int
    num_paths: int
    area_scale: float
    architecture: str
    mobility: Mobility

    def arch(self) -> RisArchitecture:
        return RisArchitecture.from_label(self.num_elements, self.architecture)


class ExperimentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    description: str = ""

    # Sweep axes
    num_elements: List[int] = [16, 36, 64]
    num_antennas: List[int] = [4, 16]
    num_paths: List[int] = [4, 6, 8]
    area_scales: List[float] = [1.2]
    architectures: List[str] = ["single", "group-4", "fully"]
    mobility: List[Mobility] = ["MA", "FA"]

    trials: int = 50
    base_seed: int = 2025
    output_dir: str = "results"

    scenario: ScenarioParams = Field(default_factory=ScenarioParams)
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @model_validator(mode="after")
    def validate_spec(self):
        if self.trials < 0:
            raise ConfigurationError("trials must be non-negative")
        if self.base_seed < 0:
            raise ConfigurationError("base_seed must be non-negative")

        axes = {
            "num_elements": self.num_elements,
            "num_antennas": self.num_antennas,
            "num_paths": self.num_paths,
            "area_scales": self.area_scales,
            "architectures": self.architectures,
            "mobility": self.mobility,
        }
        for axis, values in axes.items():
            if not values:
                raise ConfigurationError(f"Sweep axis {axis} must not be empty")

        if min(self.num_elements) < 1 or min(self.num_antennas) < 1:
            raise ConfigurationError("num_elements and num_antennas must be positive")
        if min(self.num_paths) < 1:
            raise ConfigurationError("num_paths must be at least 1")
        if min(self.area_scales) < 1.0:
            raise ConfigurationError(
                "area_scales below 1 cannot hold the fixed-antenna layout"
            )

        for num_elements in self.num_elements:
            for label in self.architectures:
                try:
                    RisArchitecture.from_label(num_elements, label)
                except ArchitectureError as e:
                    raise ConfigurationError(
                        f"Architecture {label} is invalid for M={num_elements}: {e}"
                    ) from e

        return self

    def scenario_points(self) -> List[tuple]:
        return list(
            itertools.product(
                self.num_elements, self.num_antennas, self.num_paths, self.area_scales
            )
        )

    def sweep_points(self) -> Iterator[SweepPoint]:
        point_id = 0
        for scenario_id, (m, n_t, n_paths, l_s) in enumerate(self.scenario_points()):
            for label in self.architectures:
                for mobility in self.mobility:
                    yield SweepPoint(
                        point_id=point_id,
                        scenario_id=scenario_id,
                        num_elements=m,
                        num_antennas=n_t,
                        num_paths=n_paths,
                        area_scale=l_s,
                        architecture=label,
                        mobility=mobility,
                    )
                    point_id += 1


class Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    threads: int = 1
    log_level: str = "INFO"

    @model_validator(mode="after")
    def validate_settings(self):
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        return self


class AppConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiments: Dict[str, ExperimentSpec]
    settings: Settings = Field(default_factory=Settings)

    @model_validator(mode="after")
    def validate_config(self):
        seen_names = set()
        for name in self.experiments.keys():
            name_lower = name.lower()
            if name_lower in seen_names:
                raise ConfigurationError(f"{name} is defined twice!")
            seen_names.add(name_lower)

        return self


class ExperimentManager:
    def __init__(self, config: AppConfig):
        self.config = config

    def list_experiment_names(self) -> List[str]:
        return list(self.config.experiments.keys())

    def get_experiment(self, name: str) -> ExperimentSpec:
        spec = self.config.experiments.get(name)
        if spec is None:
            raise ExperimentNotFoundError(f"Experiment config entry for {name} not found")
        return spec

    def resolve(
        self,
        name: str,
        trials: int | None = None,
        seed: int | None = None,
        output_dir: str | None = None,
    ) -> ExperimentSpec:
        """Experiment spec with command-line style overrides applied"""
        spec = self.get_experiment(name)
        update = {}
        if trials is not None:
            update["trials"] = trials
        if seed is not None:
            update["base_seed"] = seed
        if output_dir is not None:
            update["output_dir"] = output_dir
        if not update:
            return spec
        # Re-validate so overrides go through the same checks as the file
        return ExperimentSpec(**{**spec.model_dump(), **update})

    def default_experiment_name(self) -> str:
        names = self.list_experiment_names()
        if not names:
            raise ExperimentNotFoundError("No experiments are configured")
        return names[0]


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def load_config(config_path: str) -> AppConfig:
    with open(config_path, "r") as f:
        config_data = yaml.safe_load(f)
    return AppConfig(**config_data)
