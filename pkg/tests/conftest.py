"""Shared fixtures for the racing tests."""

from pathlib import Path

import numpy as np
import pytest

from racing.config import ControlConfig, EstimatorConfig, VehicleParams
from racing.curvature_model import curvature_function
from racing.geometry import integrate_curve
from racing.models import CenterlineMap, CurvatureModel, Measurement, PlanarPose, Polyline, SigmoidParams


DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "examples"


def model_curve(model: CurvatureModel, length: float, spacing: float,
                start: PlanarPose = PlanarPose()) -> CenterlineMap:
    """Noiseless centerline generated by a curvature model."""
    steps = np.full(int(round(length / spacing)), spacing)
    mu = integrate_curve(start, curvature_function(model), steps)
    return CenterlineMap(mu=mu, cum_arc=np.concatenate(([0.0], np.cumsum(steps))), model=model)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def straight_model() -> CurvatureModel:
    return CurvatureModel(kappa0=0.0, sigmoids=[SigmoidParams(a=0.0, b=1.0, c=30.0)])


@pytest.fixture
def turn_model() -> CurvatureModel:
    """Straight that bends into a left-hand arc of radius 0.5 m."""
    return CurvatureModel(kappa0=0.0, sigmoids=[SigmoidParams(a=2.0, b=1.0, c=30.0)])


@pytest.fixture
def straight_map(straight_model: CurvatureModel) -> CenterlineMap:
    return model_curve(straight_model, 3.0, 0.04)


@pytest.fixture
def turn_map(turn_model: CurvatureModel) -> CenterlineMap:
    return model_curve(turn_model, 2.0, 0.04)


@pytest.fixture
def turn_measurement(turn_model: CurvatureModel) -> Measurement:
    curve = model_curve(turn_model, 2.0, 0.02)
    return Measurement(points=Polyline.from_points(curve.points), time_index=0)


@pytest.fixture
def estimator_config() -> EstimatorConfig:
    return EstimatorConfig()


@pytest.fixture
def vehicle() -> VehicleParams:
    return VehicleParams.preset("miniature-racing")


@pytest.fixture
def short_horizon() -> ControlConfig:
    """Nominal weights with a short horizon to keep solves fast."""
    return ControlConfig.nominal(N=10)
