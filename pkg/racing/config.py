"""Configuration models, vehicle presets and runtime settings."""

import json
import logging
import math
import os
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from racing.errors import ConfigError
from racing.models import ChordRule, EstimationMethod, RunMode, SelectStrategy, Track
from racing.tracks import BUILTIN_TRACKS


logger = logging.getLogger(__name__)


class SolverConfig(BaseModel):
    """Augmented-Lagrangian least-squares solver settings."""
    model_config = ConfigDict(extra="forbid")

    stationarity_tol: float = Field(default=1e-6, gt=0.0)
    constraint_tol: float = Field(default=1e-8, gt=0.0)
    max_outer_iters: int = Field(default=50, ge=1)
    max_inner_iters: int = Field(default=200, ge=1)
    penalty_init: float = Field(default=10.0, gt=0.0)
    penalty_growth: float = Field(default=10.0, gt=1.0)
    penalty_max: float = Field(default=1e8, gt=0.0)
    violation_decrease: float = Field(default=0.25, gt=0.0, lt=1.0)
    merit_weight: float = Field(default=1e3, gt=0.0)
    ordering_gap: float = Field(default=1e-3, ge=0.0)
    kappa_margin: float = Field(default=0.01, ge=0.0)


class EstimatorConfig(BaseModel):
    """Centerline estimation settings."""
    model_config = ConfigDict(extra="forbid")

    delta_lambda: float = Field(default=0.04, gt=0.0)
    kappa_bounds: Tuple[float, float] = (-4.0, 4.0)
    map_length_cap: float = Field(default=3.5, gt=0.0)
    overlap_dist: float = Field(default=0.02, gt=0.0)
    min_overlap_points: int = Field(default=30, ge=1)
    min_new_points: int = Field(default=30, ge=1)
    c_fixed: float = Field(default=30.0, gt=0.0)
    c_bounds: Optional[Tuple[float, float]] = None
    reg_weight: float = Field(default=0.0005, ge=0.0)
    regularize: bool = False
    initialize: bool = True
    smooth_abs_eps: float = Field(default=1e-6, gt=0.0)
    change_threshold: float = Field(default=0.8, gt=0.0)
    init_window: int = Field(default=5, ge=1)
    init_spacing: float = Field(default=0.1, gt=0.0)
    min_transition_gap: float = Field(default=0.3, gt=0.0)
    max_sigmoids: int = Field(default=30, ge=1)
    prune_threshold: float = Field(default=1e-3, ge=0.0)
    min_fit_points: int = Field(default=10, ge=3)
    chord_rule: ChordRule = ChordRule.ARC_CHORD
    solver: SolverConfig = Field(default_factory=SolverConfig)

    @field_validator("kappa_bounds")
    @classmethod
    def _straddle_zero(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not value[0] < 0.0 < value[1]:
            raise ValueError("kappa_bounds must straddle 0")
        return value


class SamplingConfig(BaseModel):
    """Scenario sampling settings."""
    model_config = ConfigDict(extra="forbid")

    sigma_theta: float = Field(default=0.1, ge=0.0)
    distance_budget: float = Field(default=0.1, ge=0.0)
    n_rep: int = Field(default=100, ge=0)
    m: int = Field(default=5, ge=1)
    seed: int = 0
    select_strategy: SelectStrategy = SelectStrategy.FARTHEST
    b_scale: float = Field(default=0.25, ge=0.0)
    exhaustive_limit: int = Field(default=5000, ge=1)

    @model_validator(mode="after")
    def _enough_attempts(self) -> "SamplingConfig":
        if self.n_rep < self.m - 1:
            raise ValueError("n_rep must be at least m - 1")
        return self


class VehicleParams(BaseModel):
    """Single-track vehicle with simplified Pacejka tires."""
    model_config = ConfigDict(extra="forbid")

    m: float = Field(default=0.2, gt=0.0)
    I_z: float = Field(default=0.0004, gt=0.0)
    l_f: float = Field(default=0.056, gt=0.0)
    l_r: float = Field(default=0.045, gt=0.0)
    B_f: float = 8.0
    B_r: float = 8.0
    C_f: float = 1.4
    C_r: float = 1.7
    D_f: float = Field(default=0.43, gt=0.0)
    D_r: float = Field(default=0.6, gt=0.0)
    C1: float = 0.98
    C2: float = 0.0
    C3: float = 0.0
    C4: float = 0.03
    C5: float = 0.02
    C6: float = 0.08

    @classmethod
    def preset(cls, name: str) -> "VehicleParams":
        """Return a named parameter set."""
        if name == "miniature-paper":
            return cls()
        if name == "miniature-racing":
            return cls(C4=-0.03, C6=-0.08)
        raise ConfigError(f"Unknown vehicle preset '{name}'")

    def scaled(self, mass_scale: float = 1.0, inertia_scale: float = 1.0) -> "VehicleParams":
        return self.model_copy(update={"m": self.m * mass_scale, "I_z": self.I_z * inertia_scale})


VEHICLE_PRESETS = ("miniature-paper", "miniature-racing")


class ControlConfig(BaseModel):
    """Receding-horizon controller settings."""
    model_config = ConfigDict(extra="forbid")

    N: int = Field(default=35, ge=2)
    dt: float = Field(default=1.0 / 30.0, gt=0.0)
    q_s: float = Field(default=100.0, gt=0.0)
    q_eta: float = Field(default=75.0, gt=0.0)
    q_phi: float = Field(default=1000.0, gt=0.0)
    q_vx: float = Field(default=10.0, gt=0.0)
    q_vy: float = Field(default=10.0, gt=0.0)
    R: Tuple[float, float] = (0.01, 0.001)
    width: float = Field(default=0.5, gt=0.0)
    heading_bounds: Optional[Tuple[float, float]] = (-math.pi / 2, math.pi / 2)
    vx_bounds: Tuple[float, float] = (0.2, 5.0)
    vy_bounds: Tuple[float, float] = (-1.0, 1.0)
    r_bounds: Tuple[float, float] = (-5.0, 5.0)
    delta_bounds: Tuple[float, float] = (-0.41, 0.41)
    tau_bounds: Tuple[float, float] = (0.0, 0.5)
    delta_rate_bounds: Tuple[float, float] = (-5.0, 5.0)
    tau_rate_bounds: Tuple[float, float] = (-5.0, 5.0)
    slack_penalty: float = Field(default=1e4, gt=0.0)
    slack_quadratic: float = Field(default=1e2, ge=0.0)
    max_sqp_iters: int = Field(default=30, ge=1)
    kkt_tol: float = Field(default=1e-6, gt=0.0)
    min_step: float = Field(default=1e-4, gt=0.0)
    substeps: int = Field(default=1, ge=1)
    min_denominator: float = Field(default=0.1, gt=0.0)
    reference_extension: float = Field(default=1.0, ge=0.0)
    fallback_input: Tuple[float, float] = (0.0, -5.0)
    max_failures: int = Field(default=2, ge=1)

    @field_validator("R")
    @classmethod
    def _positive_r(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if value[0] <= 0.0 or value[1] <= 0.0:
            raise ValueError("R must be positive definite")
        return value

    @model_validator(mode="after")
    def _boxes_nonempty(self) -> "ControlConfig":
        boxes = {
            "vx_bounds": self.vx_bounds, "vy_bounds": self.vy_bounds,
            "r_bounds": self.r_bounds, "delta_bounds": self.delta_bounds,
            "tau_bounds": self.tau_bounds, "delta_rate_bounds": self.delta_rate_bounds,
            "tau_rate_bounds": self.tau_rate_bounds,
        }
        if self.heading_bounds is not None:
            boxes["heading_bounds"] = self.heading_bounds
        for name, (lower, upper) in boxes.items():
            if lower > upper:
                raise ValueError(f"{name} is empty")
        return self

    @classmethod
    def nominal(cls, **overrides: Any) -> "ControlConfig":
        """Weights and heading bounds of the single-reference controller."""
        return cls(**overrides)

    @classmethod
    def uncertainty_aware(cls, **overrides: Any) -> "ControlConfig":
        """Weights of the multi-scenario controller; heading is unconstrained."""
        values: Dict[str, Any] = {
            "q_s": 400.0, "q_eta": 100.0, "q_phi": 300.0,
            "q_vx": 5.0, "q_vy": 5.0, "heading_bounds": None,
        }
        values.update(overrides)
        return cls(**values)


class SensorConfig(BaseModel):
    """Synthetic forward-looking centerline sensor."""
    model_config = ConfigDict(extra="forbid")

    fov_half_angle: float = Field(default=math.radians(30.0), gt=0.0, le=math.pi)
    max_range: float = Field(default=3.5, gt=0.0)
    min_range: float = Field(default=0.1, ge=0.0)
    sample_spacing: float = Field(default=0.02, gt=0.0)
    noise_sigma0: float = Field(default=0.002, ge=0.0)
    noise_sigma_slope: float = Field(default=0.005, ge=0.0)
    noise_truncation: float = Field(default=3.0, ge=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _range_order(self) -> "SensorConfig":
        if self.min_range >= self.max_range:
            raise ValueError("min_range must be below max_range")
        return self


class SimulationConfig(BaseModel):
    """Closed-loop run settings."""
    model_config = ConfigDict(extra="forbid")

    laps: int = Field(default=1, ge=1)
    max_ticks: int = Field(default=1500, ge=1)
    dt: float = Field(default=1.0 / 30.0, gt=0.0)
    substeps: int = Field(default=4, ge=1)
    initial_speed: float = Field(default=0.5, gt=0.0)
    start_offset: float = Field(default=0.0, ge=0.0)
    divergence_factor: float = Field(default=2.0, gt=0.0)
    stall_speed: float = Field(default=0.05, ge=0.0)
    success_hausdorff: float = Field(default=0.2, gt=0.0)
    min_coverage: float = Field(default=0.95, gt=0.0, le=1.0)
    truth_steepness: float = Field(default=60.0, gt=0.0)
    method: EstimationMethod = EstimationMethod.OURS


class AblationConfig(BaseModel):
    """Suite runner settings."""
    model_config = ConfigDict(extra="forbid")

    n_runs: int = Field(default=10, ge=1)
    tracks: List[str] = Field(default_factory=lambda: ["trackA-analogue", "trackB-analogue"])
    m_values: List[int] = Field(default_factory=lambda: [1, 5, 10])
    lateral_offset: float = Field(default=0.1, ge=0.0)
    heading_offset: float = Field(default=0.15, ge=0.0)
    weight_range: Tuple[float, float] = (0.8, 1.25)
    mass_range: Tuple[float, float] = (0.9, 1.1)

    @field_validator("tracks")
    @classmethod
    def _known_tracks(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in BUILTIN_TRACKS]
        if unknown:
            raise ValueError(f"unknown track(s) {unknown}, expected one of {sorted(BUILTIN_TRACKS)}")
        return value


class ExperimentSpec(BaseModel):
    """One experiment document: every module config plus mode, outputs and seeds."""
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    track: Union[str, Track] = "trackA-analogue"
    vehicle: Union[str, VehicleParams] = "miniature-paper"
    sensor: SensorConfig = Field(default_factory=SensorConfig)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    control: Optional[ControlConfig] = None
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    ablation: AblationConfig = Field(default_factory=AblationConfig)
    mode: RunMode = RunMode.NOMINAL
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = "runs"
    plots: bool = False

    @field_validator("track")
    @classmethod
    def _known_track(cls, value: Union[str, Track]) -> Union[str, Track]:
        if isinstance(value, str) and value not in BUILTIN_TRACKS:
            raise ValueError(f"unknown track '{value}', expected one of {sorted(BUILTIN_TRACKS)}")
        return value

    @field_validator("vehicle")
    @classmethod
    def _known_preset(cls, value: Union[str, VehicleParams]) -> Union[str, VehicleParams]:
        if isinstance(value, str) and value not in VEHICLE_PRESETS:
            raise ValueError(f"unknown vehicle preset '{value}'")
        return value

    @field_validator("seeds")
    @classmethod
    def _some_seed(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("seeds must not be empty")
        return value

    def resolved_vehicle(self) -> VehicleParams:
        if isinstance(self.vehicle, VehicleParams):
            return self.vehicle
        return VehicleParams.preset(self.vehicle)

    def resolved_control(self) -> ControlConfig:
        """Explicit control config, else the weight set matching the mode."""
        if self.control is not None:
            return self.control
        if self.mode == RunMode.UNCERTAINTY_AWARE:
            return ControlConfig.uncertainty_aware()
        return ControlConfig.nominal()


class RacingSettings(BaseSettings):
    """Process-level settings read from RACING_* environment variables."""
    model_config = SettingsConfigDict(env_prefix="RACING_")

    log_level: str = "INFO"
    log_file: Optional[str] = "racing.log"
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    output_dir: str = "runs"


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(document: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """Apply `a.b.c=value` overrides to a raw experiment document."""
    result = json.loads(json.dumps(document))
    for override in overrides:
        if "=" not in override:
            raise ConfigError(f"Override '{override}' is not of the form key=value")
        path, raw = override.split("=", 1)
        keys = [key for key in path.strip().split(".") if key]
        if not keys:
            raise ConfigError(f"Override '{override}' has an empty key")
        node = result
        for key in keys[:-1]:
            child = node.get(key)
            if child is None:
                child = {}
                node[key] = child
            if not isinstance(child, dict):
                raise ConfigError(f"Override '{override}' descends into non-object '{key}'")
            node = child
        node[keys[-1]] = _parse_value(raw)
        logger.debug(f"Override {path} = {node[keys[-1]]!r}")
    return result


def load_experiment(document: Dict[str, Any], overrides: Optional[List[str]] = None) -> ExperimentSpec:
    """Validate an experiment document, raising ConfigError on schema problems."""
    try:
        return ExperimentSpec.model_validate(apply_overrides(document, overrides or []))
    except ValueError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from e
