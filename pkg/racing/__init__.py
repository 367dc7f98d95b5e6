"""Uncertainty-aware perception-based racing package."""

__version__ = "0.1.0"
__author__ = "Racing Lab"
__email__ = "racing@example.com"

from .models import (
    CartesianState, CenterlineMap, ControlInput, CurvatureModel, EstimateSnapshot,
    EstimationMethod, FrenetState, Measurement, MetricsTable, PlanarPose, Polyline,
    RunMetrics, RunMode, RunResult, ScenarioSet, SelectStrategy, SigmoidParams,
    Solution, SolveStatus, Track, TrackSegment
)
from .config import (
    ControlConfig, EstimatorConfig, ExperimentSpec, RacingSettings, SamplingConfig,
    SensorConfig, SimulationConfig, VehicleParams
)
from .errors import RacingError
from .estimation import CenterlineEstimator, estimation_step
from .sampling import sample_scenarios
from .control import RacingController, solve_nominal, solve_scenario
from .tracks import TrackGeometry, get_track
from .simulation import ClosedLoopSimulator, run_closed_loop
from .ablation import ablation_suite, scenario_sweep
from .storage import ArtifactStore

__all__ = [
    "CartesianState",
    "CenterlineMap",
    "ControlInput",
    "CurvatureModel",
    "EstimateSnapshot",
    "EstimationMethod",
    "FrenetState",
    "Measurement",
    "MetricsTable",
    "PlanarPose",
    "Polyline",
    "RunMetrics",
    "RunMode",
    "RunResult",
    "ScenarioSet",
    "SelectStrategy",
    "SigmoidParams",
    "Solution",
    "SolveStatus",
    "Track",
    "TrackSegment",
    "ControlConfig",
    "EstimatorConfig",
    "ExperimentSpec",
    "RacingSettings",
    "SamplingConfig",
    "SensorConfig",
    "SimulationConfig",
    "VehicleParams",
    "RacingError",
    "CenterlineEstimator",
    "estimation_step",
    "sample_scenarios",
    "RacingController",
    "solve_nominal",
    "solve_scenario",
    "TrackGeometry",
    "get_track",
    "ClosedLoopSimulator",
    "run_closed_loop",
    "ablation_suite",
    "scenario_sweep",
    "ArtifactStore",
]
