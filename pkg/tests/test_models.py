"""Tests for the data models, configuration and error hierarchy."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from racing.config import (
    ControlConfig,
    ExperimentSpec,
    RacingSettings,
    SamplingConfig,
    VehicleParams,
    apply_overrides,
    load_experiment,
)
from racing.errors import (
    ConfigError,
    DomainError,
    RacingError,
    ScenarioInvalidError,
    VehicleError,
)
from racing.models import (
    CenterlineMap,
    CurvatureModel,
    EstimationMethod,
    MetricSummary,
    PlanarPose,
    Polyline,
    RunMode,
    SigmoidParams,
    SolveStatus,
)


class TestEnums:
    """Test the string enums."""

    def test_enum_values(self) -> None:
        """Test that enum values match their config spellings."""
        assert RunMode.GROUND_TRUTH == "ground-truth-reference"
        assert RunMode.UNCERTAINTY_AWARE == "uncertainty-aware"
        assert EstimationMethod.SMOOTH_NAIVE == "smooth-naive"
        assert SolveStatus.INFEASIBLE_RELAXED == "infeasible-relaxed"


class TestPlanarPose:
    """Test the PlanarPose model."""

    def test_alpha_is_wrapped(self) -> None:
        """Test that headings are wrapped into (-pi, pi]."""
        assert PlanarPose(alpha=1.5 * math.pi).alpha == pytest.approx(-0.5 * math.pi)
        assert PlanarPose(alpha=math.pi).alpha == pytest.approx(math.pi)

    def test_to_array(self) -> None:
        """Test the (alpha, x, y) array layout."""
        assert np.allclose(PlanarPose(alpha=0.1, x=2.0, y=3.0).to_array(), [0.1, 2.0, 3.0])


class TestPolyline:
    """Test the Polyline model."""

    def test_from_points_accumulates_gaps(self) -> None:
        """Test that arc length is the running sum of point gaps."""
        line = Polyline.from_points([[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]])
        assert np.allclose(line.cum_arc, [0.0, 5.0, 6.0])
        assert line.length == pytest.approx(6.0)
        assert len(line) == 3

    def test_arrays_are_read_only(self) -> None:
        """Test that the stored arrays cannot be mutated in place."""
        line = Polyline.from_points([[0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            line.points[0, 0] = 5.0

    def test_arc_must_start_at_zero(self) -> None:
        """Test that a shifted arc grid is rejected."""
        with pytest.raises(ValidationError):
            Polyline(points=[[0.0, 0.0], [1.0, 0.0]], cum_arc=[1.0, 2.0])


class TestCenterlineMap:
    """Test the CenterlineMap model."""

    def test_anchor_and_points(self) -> None:
        """Test the anchor pose and point view."""
        centerline = CenterlineMap(mu=[[0.2, 1.0, 2.0], [0.2, 1.5, 2.1]], cum_arc=[0.0, 0.51],
                                   model=CurvatureModel())
        assert centerline.anchor.x == pytest.approx(1.0)
        assert centerline.points.shape == (2, 2)
        assert centerline.length == pytest.approx(0.51)

    def test_grid_must_increase(self) -> None:
        """Test that a repeated arc position is rejected."""
        with pytest.raises(ValidationError):
            CenterlineMap(mu=[[0, 0, 0], [0, 0, 0]], cum_arc=[0.0, 0.0], model=CurvatureModel())


class TestCurvatureModel:
    """Test the CurvatureModel model."""

    def test_arrays(self) -> None:
        """Test the parameter arrays."""
        model = CurvatureModel(kappa0=0.5, sigmoids=[SigmoidParams(a=1.0, b=0.3), SigmoidParams(a=-2.0, b=0.9, c=10.0)])
        a, b, c = model.arrays()
        assert np.allclose(a, [1.0, -2.0])
        assert np.allclose(b, [0.3, 0.9])
        assert np.allclose(c, [30.0, 10.0])
        assert model.n_sigmoids == 2

    def test_bounds_must_be_ordered(self) -> None:
        """Test that inverted curvature bounds are rejected."""
        with pytest.raises(ValidationError):
            CurvatureModel(bounds=(4.0, -4.0))

    def test_steepness_must_be_positive(self) -> None:
        """Test that a non-positive steepness is rejected."""
        with pytest.raises(ValidationError):
            SigmoidParams(a=1.0, b=0.0, c=0.0)


class TestMetricSummary:
    """Test the MetricSummary formatting."""

    def test_format_in_centimeters(self) -> None:
        """Test mean ± std scaled to centimeters."""
        assert MetricSummary(mean=0.0123, std=0.001).format(100.0, 2) == "1.23 ± 0.10"


class TestConfig:
    """Test configuration models and overrides."""

    def test_vehicle_presets(self) -> None:
        """Test the stock preset, the resistive opt-in preset and an unknown name."""
        stock = VehicleParams.preset("miniature-paper")
        assert (stock.m, stock.I_z, stock.l_f, stock.l_r) == (0.2, 0.0004, 0.056, 0.045)
        assert (stock.B_f, stock.B_r, stock.C_f, stock.C_r) == (8.0, 8.0, 1.4, 1.7)
        assert (stock.D_f, stock.D_r) == (0.43, 0.6)
        assert (stock.C1, stock.C2, stock.C3, stock.C4, stock.C5, stock.C6) == (
            0.98, 0.0, 0.0, 0.03, 0.02, 0.08)
        assert stock == VehicleParams()
        racing = VehicleParams.preset("miniature-racing")
        assert (racing.C4, racing.C6) == (-0.03, -0.08)
        with pytest.raises(ConfigError):
            VehicleParams.preset("go-kart")

    def test_scaled_vehicle(self) -> None:
        """Test mass and inertia scaling."""
        params = VehicleParams().scaled(1.1, 0.9)
        assert params.m == pytest.approx(0.22)
        assert params.I_z == pytest.approx(0.00036)

    def test_control_weight_sets(self) -> None:
        """Test the nominal and uncertainty-aware weight sets."""
        nominal = ControlConfig.nominal()
        aware = ControlConfig.uncertainty_aware()
        assert (nominal.q_s, nominal.q_eta, nominal.q_phi) == (100.0, 75.0, 1000.0)
        assert (aware.q_s, aware.q_eta, aware.q_phi, aware.q_vx) == (400.0, 100.0, 300.0, 5.0)
        assert nominal.heading_bounds is not None
        assert aware.heading_bounds is None

    def test_empty_box_rejected(self) -> None:
        """Test that an inverted box is rejected."""
        with pytest.raises(ValidationError):
            ControlConfig(delta_bounds=(0.5, -0.5))

    def test_input_weights_positive(self) -> None:
        """Test that a zero input weight is rejected."""
        with pytest.raises(ValidationError):
            ControlConfig(R=(0.0, 0.001))

    def test_sampling_needs_enough_attempts(self) -> None:
        """Test that n_rep below m - 1 is rejected."""
        with pytest.raises(ValidationError):
            SamplingConfig(n_rep=2, m=5)

    def test_apply_overrides(self) -> None:
        """Test dotted-path overrides with JSON values."""
        document = apply_overrides({"seeds": [1]}, ["control.N=12", "sampling.m=10", "name=demo"])
        assert document == {"seeds": [1], "control": {"N": 12}, "sampling": {"m": 10}, "name": "demo"}

    def test_override_needs_equals(self) -> None:
        """Test that an override without a value is a config error."""
        with pytest.raises(ConfigError):
            apply_overrides({}, ["control.N"])

    def test_load_experiment_resolves_control(self) -> None:
        """Test that the mode selects the default weight set."""
        spec = load_experiment({"mode": "uncertainty-aware"})
        assert spec.resolved_control().q_s == pytest.approx(400.0)
        assert spec.resolved_vehicle() == VehicleParams()

    def test_invalid_mode_is_config_error(self) -> None:
        """Test that an unknown mode string fails validation."""
        with pytest.raises(ConfigError):
            load_experiment({"mode": "full-send"})

    def test_unknown_key_rejected(self) -> None:
        """Test that unknown top-level keys are rejected."""
        with pytest.raises(ConfigError):
            load_experiment({"trak": "circle"})

    def test_unknown_nested_key_rejected(self) -> None:
        """Test that a misspelled key inside a module section is rejected."""
        with pytest.raises(ConfigError, match="delta_lamda"):
            load_experiment({"estimator": {"delta_lamda": 0.05}})
        with pytest.raises(ConfigError):
            load_experiment({"sampling": {"mm": 9}})
        with pytest.raises(ConfigError):
            load_experiment({}, ["control.horizon=20"])

    def test_unknown_track_rejected(self) -> None:
        """Test that track names are checked against the built-in circuits."""
        with pytest.raises(ConfigError, match="nurburgring"):
            load_experiment({"track": "nurburgring"})
        with pytest.raises(ConfigError):
            load_experiment({"ablation": {"tracks": ["circle", "monza"]}})

    def test_default_spec(self) -> None:
        """Test the default experiment document."""
        spec = ExperimentSpec()
        assert spec.track == "trackA-analogue"
        assert spec.seeds == [0]
        assert spec.vehicle == "miniature-paper"

    def test_settings_from_environment(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test RACING_* environment variables."""
        monkeypatch.setenv("RACING_JOBS", "3")
        monkeypatch.setenv("RACING_LOG_LEVEL", "DEBUG")
        settings = RacingSettings()
        assert settings.jobs == 3
        assert settings.log_level == "DEBUG"


class TestErrors:
    """Test the error hierarchy."""

    def test_hierarchy(self) -> None:
        """Test that module errors share the package base class."""
        assert issubclass(DomainError, VehicleError)
        assert issubclass(ConfigError, RacingError)

    def test_scenario_error_keeps_index(self) -> None:
        """Test that the failing scenario index is kept."""
        error = ScenarioInvalidError(3, "off the reference")
        assert error.scenario == 3
        assert "scenario 3" in str(error)
