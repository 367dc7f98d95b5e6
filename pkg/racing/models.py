"""Core data models for the racing package."""

import math
from enum import Enum
from typing import Any, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _frozen_array(value: Any, width: Optional[int] = None) -> np.ndarray:
    """Copy into a read-only float array, optionally reshaped to rows of `width`."""
    array = np.array(value, dtype=float)
    if width is not None:
        array = array.reshape(-1, width)
    else:
        array = array.ravel()
    array.setflags(write=False)
    return array


def _wrap(angle: float) -> float:
    return math.pi - (math.pi - angle) % (2.0 * math.pi)


class RunMode(str, Enum):
    """Which reference the controller drives on."""
    GROUND_TRUTH = "ground-truth-reference"
    NOMINAL = "nominal-estimate"
    UNCERTAINTY_AWARE = "uncertainty-aware"


class EstimationMethod(str, Enum):
    """Centerline estimators compared in the ablation."""
    OURS = "ours"
    NAIVE = "naive"
    SMOOTH_NAIVE = "smooth-naive"


class ChordRule(str, Enum):
    """Step length used when advancing position between curvature samples."""
    ARC_CHORD = "arc-chord"
    MIDPOINT = "midpoint"


class SelectStrategy(str, Enum):
    """How scenarios are picked from the accepted candidates."""
    FARTHEST = "farthest-from-estimate"
    MAX_DIVERSITY = "max-diversity"


class SolveStatus(str, Enum):
    """Outcome of one controller solve."""
    OPTIMAL = "optimal"
    MAX_ITER = "max-iter"
    INFEASIBLE_RELAXED = "infeasible-relaxed"
    FAILED = "failed"


class ConstraintName(str, Enum):
    """Constraints on the sigmoid curvature model."""
    ORDERING = "ordering"
    NONNEGATIVE_TRANSITION = "nonnegative_transition"
    TRANSITION_IN_RANGE = "transition_in_range"
    AMPLITUDE_BOUNDS = "amplitude_bounds"
    CURVATURE_BOUNDS = "curvature_bounds"


class PlanarPose(BaseModel):
    """Tangent angle and position of a point on a planar curve."""
    model_config = ConfigDict(frozen=True)

    alpha: float = 0.0
    x: float = 0.0
    y: float = 0.0

    @field_validator("alpha")
    @classmethod
    def _wrap_alpha(cls, value: float) -> float:
        return _wrap(value)

    def to_array(self) -> np.ndarray:
        """Return (alpha, x, y)."""
        return np.array([self.alpha, self.x, self.y])


class Polyline(BaseModel):
    """Ordered planar points with their cumulative Euclidean arc lengths."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    cum_arc: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def _points_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, width=2)

    @field_validator("cum_arc", mode="before")
    @classmethod
    def _arc_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def _check_arc(self) -> "Polyline":
        if len(self.points) != len(self.cum_arc):
            raise ValueError("points and cum_arc must have the same length")
        if len(self.cum_arc) and self.cum_arc[0] != 0.0:
            raise ValueError("cum_arc must start at 0")
        if np.any(np.diff(self.cum_arc) < 0.0):
            raise ValueError("cum_arc must be nondecreasing")
        return self

    @classmethod
    def from_points(cls, points: Any) -> "Polyline":
        """Build a polyline whose arc grid is the running sum of point gaps."""
        array = np.array(points, dtype=float).reshape(-1, 2)
        gaps = np.hypot(*np.diff(array, axis=0).T) if len(array) > 1 else np.zeros(0)
        return cls(points=array, cum_arc=np.concatenate(([0.0], np.cumsum(gaps)))[: len(array)])

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        """Total arc length in meters."""
        return float(self.cum_arc[-1]) if len(self.cum_arc) else 0.0


class FrenetCoord(BaseModel):
    """Progress, lateral offset and heading error with respect to a reference."""
    model_config = ConfigDict(frozen=True)

    s: float
    eta: float
    phi: float


class FrenetState(BaseModel):
    """Car state [s, eta, phi, vx, vy, r, delta, tau] in the Frenet frame."""
    model_config = ConfigDict(frozen=True)

    s: float = 0.0
    eta: float = 0.0
    phi: float = 0.0
    vx: float = 1.0
    vy: float = 0.0
    r: float = 0.0
    delta: float = 0.0
    tau: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.s, self.eta, self.phi, self.vx, self.vy, self.r, self.delta, self.tau])

    @classmethod
    def from_array(cls, values: Any) -> "FrenetState":
        s, eta, phi, vx, vy, r, delta, tau = (float(v) for v in np.asarray(values, dtype=float))
        return cls(s=s, eta=eta, phi=phi, vx=vx, vy=vy, r=r, delta=delta, tau=tau)


class CartesianState(BaseModel):
    """Car state [x_c, y_c, psi, vx, vy, r, delta, tau] in the world frame."""
    model_config = ConfigDict(frozen=True)

    x_c: float = 0.0
    y_c: float = 0.0
    psi: float = 0.0
    vx: float = 1.0
    vy: float = 0.0
    r: float = 0.0
    delta: float = 0.0
    tau: float = 0.0

    @field_validator("psi")
    @classmethod
    def _wrap_psi(cls, value: float) -> float:
        return _wrap(value)

    def to_array(self) -> np.ndarray:
        return np.array([self.x_c, self.y_c, self.psi, self.vx, self.vy, self.r, self.delta, self.tau])

    @classmethod
    def from_array(cls, values: Any) -> "CartesianState":
        x_c, y_c, psi, vx, vy, r, delta, tau = (float(v) for v in np.asarray(values, dtype=float))
        return cls(x_c=x_c, y_c=y_c, psi=psi, vx=vx, vy=vy, r=r, delta=delta, tau=tau)


class ControlInput(BaseModel):
    """Steering and drivetrain rates applied over one control interval."""
    model_config = ConfigDict(frozen=True)

    delta_rate: float = 0.0
    tau_rate: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.delta_rate, self.tau_rate])


class SigmoidParams(BaseModel):
    """One curvature transition: amplitude a, location b, steepness c."""
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float = Field(default=30.0, gt=0.0)


class CurvatureModel(BaseModel):
    """Sigmoid-sum road curvature kappa(s) = kappa0 + sum a_i * sigmoid(c_i (s - b_i))."""
    model_config = ConfigDict(frozen=True)

    kappa0: float = 0.0
    sigmoids: List[SigmoidParams] = Field(default_factory=list)
    bounds: Tuple[float, float] = (-4.0, 4.0)

    @field_validator("bounds")
    @classmethod
    def _check_bounds(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not value[0] < value[1]:
            raise ValueError("curvature bounds must satisfy lower < upper")
        return value

    @property
    def n_sigmoids(self) -> int:
        return len(self.sigmoids)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return the (a, b, c) parameter arrays."""
        a = np.array([p.a for p in self.sigmoids], dtype=float)
        b = np.array([p.b for p in self.sigmoids], dtype=float)
        c = np.array([p.c for p in self.sigmoids], dtype=float)
        return a, b, c


class ConstraintViolation(BaseModel):
    """One violated curvature-model constraint."""
    model_config = ConfigDict(frozen=True)

    constraint: ConstraintName
    index: Optional[int] = None
    location: float = 0.0
    value: float = 0.0
    limit: float = 0.0
    margin: float = 0.0

    def describe(self) -> str:
        where = f"sigmoid {self.index}" if self.index is not None else f"s={self.location:.3f} m"
        return f"{self.constraint.value} violated at {where}: {self.value:.6g} vs limit {self.limit:.6g}"


class CenterlineMap(BaseModel):
    """Extended map points (alpha, x, y) on an arc grid, generated by a curvature model."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mu: np.ndarray
    cum_arc: np.ndarray
    model: CurvatureModel
    s_origin: float = 0.0

    @field_validator("mu", mode="before")
    @classmethod
    def _mu_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, width=3)

    @field_validator("cum_arc", mode="before")
    @classmethod
    def _arc_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def _check_grid(self) -> "CenterlineMap":
        if len(self.mu) != len(self.cum_arc) or len(self.mu) == 0:
            raise ValueError("mu and cum_arc must be non-empty and of equal length")
        if self.cum_arc[0] != 0.0 or np.any(np.diff(self.cum_arc) <= 0.0):
            raise ValueError("cum_arc must start at 0 and strictly increase")
        return self

    @property
    def points(self) -> np.ndarray:
        return self.mu[:, 1:]

    @property
    def length(self) -> float:
        return float(self.cum_arc[-1])

    @property
    def anchor(self) -> PlanarPose:
        return PlanarPose(alpha=float(self.mu[0, 0]), x=float(self.mu[0, 1]), y=float(self.mu[0, 2]))

    def polyline(self) -> Polyline:
        return Polyline.from_points(self.points)


class Measurement(BaseModel):
    """Ordered centerline points observed at one time step."""
    model_config = ConfigDict(frozen=True)

    points: Polyline
    time_index: int = 0

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0


class OverlapReport(BaseModel):
    """Result of matching a measurement against the current map."""
    model_config = ConfigDict(frozen=True)

    overlap: bool
    map_range: Tuple[int, int] = (-1, -1)
    measurement_range: Tuple[int, int] = (-1, -1)
    matched_map: int = 0
    matched_measurement: int = 0
    new_points: int = 0


class RetainedMap(BaseModel):
    """Old-map section and new observations prepared for a map update."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: Polyline
    arc: np.ndarray
    model: CurvatureModel
    new_points: Polyline
    alpha0: float
    s_origin: float
    folded: int = 0

    @field_validator("arc", mode="before")
    @classmethod
    def _arc_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)


class EstimationDiagnostics(BaseModel):
    """Solver record for one estimation call."""
    time_index: int = 0
    kind: str = "initial"
    converged: bool = False
    outer_iterations: int = 0
    inner_evaluations: int = 0
    objective: float = float("nan")
    kkt_residual: float = float("nan")
    max_violation: float = float("nan")
    penalty: float = float("nan")
    merit_history: List[float] = Field(default_factory=list)
    n_sigmoids: int = 0
    n_points: int = 0
    message: str = ""


class EstimationOutcome(BaseModel):
    """What one pass of the estimation loop produced."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    map: Optional[CenterlineMap] = None
    updated: bool = False
    overlap: Optional[OverlapReport] = None
    diagnostics: Optional[EstimationDiagnostics] = None
    error: Optional[str] = None


class CandidateRecord(BaseModel):
    """One sampling attempt."""
    attempt: int
    accepted: bool
    distance: float
    constraints_ok: bool


class SamplingReport(BaseModel):
    """Accepted perturbed models with their reconstructions and the attempt log."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    candidates: List[CurvatureModel] = Field(default_factory=list)
    distances: List[float] = Field(default_factory=list)
    reconstructions: List[np.ndarray] = Field(default_factory=list)
    records: List[CandidateRecord] = Field(default_factory=list)

    @property
    def accepted(self) -> int:
        return len(self.candidates)


class ScenarioSet(BaseModel):
    """Curvature realizations sharing one anchor pose and arc grid."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    models: List[CurvatureModel]
    anchor: PlanarPose
    cum_arc: np.ndarray
    s_max: float
    s_origin: float = 0.0
    shortfall: bool = False
    distances: List[float] = Field(default_factory=list)

    @field_validator("cum_arc", mode="before")
    @classmethod
    def _arc_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @property
    def m(self) -> int:
        return len(self.models)


class Solution(BaseModel):
    """Optimal input sequence and predicted trajectories of one controller solve."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    inputs: np.ndarray
    trajectories: np.ndarray
    status: SolveStatus
    kkt_residual: float = float("nan")
    max_constraint_violation: float = 0.0
    slack_usage: float = 0.0
    cost: float = float("nan")
    iterations: int = 0
    scenarios: List[int] = Field(default_factory=list)
    message: str = ""

    def first_input(self) -> ControlInput:
        return ControlInput(delta_rate=float(self.inputs[0, 0]), tau_rate=float(self.inputs[0, 1]))

    @property
    def usable(self) -> bool:
        return self.status != SolveStatus.FAILED


class TrackSegment(BaseModel):
    """Constant-curvature piece of a track."""
    model_config = ConfigDict(frozen=True)

    length: float = Field(gt=0.0)
    curvature: float = 0.0


class Track(BaseModel):
    """Closed circuit made of constant-curvature segments."""
    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    segments: List[TrackSegment]
    width: float = Field(default=0.5, gt=0.0)
    start_pose: PlanarPose = Field(default_factory=PlanarPose)

    @property
    def length(self) -> float:
        return float(sum(seg.length for seg in self.segments))


class EstimateSnapshot(BaseModel):
    """Uniform view of one centerline estimate, whatever method produced it."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    tick: int
    method: EstimationMethod
    points: np.ndarray
    kappa: np.ndarray
    cum_arc: np.ndarray
    model: Optional[CurvatureModel] = None
    s_origin: float = 0.0


class TickRecord(BaseModel):
    """One row of the closed-loop log."""
    tick: int
    time: float
    x_c: float
    y_c: float
    psi: float
    vx: float
    vy: float
    r: float
    delta: float
    tau: float
    s_true: float
    eta_true: float
    phi_true: float
    progress: float
    delta_rate: float = 0.0
    tau_rate: float = 0.0
    status: str = ""
    slack: float = 0.0
    estimate_updated: bool = False
    n_scenarios: int = 0


class RunMetrics(BaseModel):
    """Per-run estimation and tracking quality."""
    mean_hausdorff: float = 0.0
    worst_hausdorff: float = 0.0
    kappa_mae: float = 0.0
    success: bool = False
    mean_abs_eta: float = 0.0
    max_eta: float = 0.0
    lap_time: Optional[float] = None
    solver_failures: int = 0
    n_estimates: int = 0
    n_ticks: int = 0
    completed_lap: bool = False
    diverged: bool = False
    coverage: float = 0.0


class RunPerturbation(BaseModel):
    """Per-run variation applied by the suite runner."""
    model_config = ConfigDict(frozen=True)

    lateral_offset: float = 0.0
    heading_offset: float = 0.0
    weight_scale: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    mass_scale: float = 1.0
    inertia_scale: float = 1.0


class RunResult(BaseModel):
    """Everything one closed-loop run produced."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    track: str
    mode: RunMode
    method: EstimationMethod
    seed: int
    log: List[TickRecord] = Field(default_factory=list)
    estimates: List[EstimateSnapshot] = Field(default_factory=list)
    estimation_diagnostics: List[EstimationDiagnostics] = Field(default_factory=list)
    solve_diagnostics: List[dict] = Field(default_factory=list)
    metrics: RunMetrics = Field(default_factory=RunMetrics)
    termination: str = ""


class MetricSummary(BaseModel):
    """Mean and population standard deviation of one metric over several runs."""
    mean: float = 0.0
    std: float = 0.0

    def format(self, scale: float = 1.0, digits: int = 2) -> str:
        return f"{self.mean * scale:.{digits}f} ± {self.std * scale:.{digits}f}"


class MetricsTable(BaseModel):
    """Aggregated metrics of one suite cell (method or scenario count on one track)."""
    label: str
    track: str
    runs: int
    hausdorff: MetricSummary = Field(default_factory=MetricSummary)
    kappa_mae: MetricSummary = Field(default_factory=MetricSummary)
    mean_abs_eta: MetricSummary = Field(default_factory=MetricSummary)
    max_eta: MetricSummary = Field(default_factory=MetricSummary)
    success_rate: float = 0.0
    worst_hausdorff: float = 0.0
    overall_max_eta: float = 0.0
    solver_failures: int = 0
