"""Tests for the contouring controllers."""

import numpy as np
import pytest

import racing.control as control
from racing.config import ControlConfig
from racing.control import (
    RacingController,
    S,
    ShootingProblem,
    _Layout,
    shift_solution,
    solve_nominal,
    solve_scenario,
    stage_cost,
    terminal_cost,
    trajectory_cost,
)
from racing.errors import ControlError, ScenarioInvalidError
from racing.models import (
    CartesianState,
    ControlInput,
    FrenetState,
    PlanarPose,
    ScenarioSet,
    Solution,
    SolveStatus,
)
from racing.vehicle import STATE_SIZE
from tests.conftest import model_curve


def _solution(N: int = 10, m: int = 1, status: SolveStatus = SolveStatus.OPTIMAL) -> Solution:
    inputs = np.column_stack((np.arange(N, dtype=float), -np.arange(N, dtype=float)))
    trajectories = np.zeros((m, N + 1, STATE_SIZE))
    trajectories[:, :, 0] = np.arange(N + 1)
    return Solution(inputs=inputs, trajectories=trajectories, status=status)


class TestCosts:
    """Test the stage, terminal and horizon costs."""

    def test_first_stage_is_input_effort_only(self):
        """Test that stage 0 only carries the input term."""
        config = ControlConfig.nominal()
        cost = stage_cost(None, None, ControlInput(delta_rate=1.0, tau_rate=1.0), config)
        assert cost == pytest.approx(0.011)

    def test_stage_cost_rewards_progress(self):
        """Test the progress reward and tracking penalty of a stage."""
        config = ControlConfig.nominal()
        prev = FrenetState(s=0.0)
        cur = FrenetState(s=0.1, eta=0.1)
        cost = stage_cost(prev, cur, ControlInput(), config)
        assert cost == pytest.approx(-100.0 * 0.1 + 75.0 * 0.01)

    def test_terminal_cost(self):
        """Test the terminal velocity penalty."""
        config = ControlConfig.nominal()
        assert terminal_cost(FrenetState(vx=1.0, vy=0.5), config) == pytest.approx(10.0 + 2.5)

    def test_problem_cost_matches_trajectory_cost(self, straight_model, vehicle, short_horizon):
        """Test that the QP objective equals the horizon cost at any decision vector."""
        rng = np.random.default_rng(3)
        N = short_horizon.N
        x0 = np.tile(FrenetState().to_array(), (2, 1))
        problem = ShootingProblem(x0, [straight_model, straight_model], 3.0, short_horizon, vehicle)
        U = rng.normal(size=(N, 2))
        X = rng.normal(size=(2, N + 1, STATE_SIZE))
        slack = np.abs(rng.normal(size=N))
        z = _Layout.join(U, X, slack)
        assert problem.cost(z) == pytest.approx(trajectory_cost(U, X, slack, short_horizon), rel=1e-10)


class TestShootingProblem:
    """Test the multiple-shooting transcription."""

    def test_rollout_closes_every_gap(self, straight_model, vehicle, short_horizon):
        """Test that a rolled-out trajectory has zero shooting gaps."""
        problem = ShootingProblem(FrenetState().to_array(), [straight_model], 3.0, short_horizon, vehicle)
        U = np.full((short_horizon.N, 2), 0.5)
        X = problem.rollout(U)
        z = _Layout.join(U, X, np.zeros(short_horizon.N))
        assert np.max(np.abs(problem.gaps(z))) < 1e-12

    def test_state_boxes_widen_to_initial_state(self, straight_model, vehicle, short_horizon):
        """Test that a slow initial state stays inside the speed box."""
        x0 = FrenetState(vx=0.1).to_array()
        problem = ShootingProblem(x0, [straight_model], 3.0, short_horizon, vehicle)
        boxes = {component: (lo, hi) for component, lo, hi in problem.state_boxes()}
        assert boxes[3][0][0] == pytest.approx(0.1)
        assert boxes[3][1][0] == pytest.approx(5.0)

    def test_progress_bound_is_a_hard_box(self, straight_model, vehicle, short_horizon):
        """Test that progress beyond s_max is a box violation, not slack."""
        N = short_horizon.N
        problem = ShootingProblem(FrenetState().to_array(), [straight_model], 0.2, short_horizon, vehicle)
        boxes = {component: (lo, hi) for component, lo, hi in problem.state_boxes()}
        assert boxes[S][1][0] == pytest.approx(0.2)
        X = np.zeros((1, N + 1, STATE_SIZE))
        X[0, :, 0] = np.linspace(0.0, 0.5, N + 1)
        X[0, :, 3] = 1.0
        np.testing.assert_array_equal(problem.required_slack(X), np.zeros(N))
        assert problem.box_violation(np.zeros((N, 2)), X) == pytest.approx(0.3)

    def test_mismatched_initial_states(self, straight_model, vehicle, short_horizon):
        """Test that every scenario model needs an initial state."""
        with pytest.raises(ValueError):
            ShootingProblem(FrenetState().to_array(), [straight_model, straight_model], 3.0,
                            short_horizon, vehicle)


class TestSolveNominal:
    """Test the single-reference controller."""

    def test_centered_on_straight(self, straight_map, vehicle, short_horizon):
        """Test that a centered car on a straight drives ahead without steering."""
        solution = solve_nominal(FrenetState(vx=1.0), straight_map, None, short_horizon, vehicle)
        assert solution.status in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITER)
        assert solution.inputs.shape == (short_horizon.N, 2)
        assert solution.trajectories.shape == (1, short_horizon.N + 1, STATE_SIZE)
        assert np.max(np.abs(solution.inputs[:, 0])) < 1e-3
        assert solution.trajectories[0, -1, 0] > 0.2
        assert solution.slack_usage <= 1e-6

    def test_off_track_start_relaxes(self, straight_map, vehicle, short_horizon):
        """Test that a start outside the track needs slack and reports it."""
        solution = solve_nominal(FrenetState(eta=0.3), straight_map, None, short_horizon, vehicle)
        assert solution.status == SolveStatus.INFEASIBLE_RELAXED
        assert solution.slack_usage > 0.0
        assert solution.usable

    def test_progress_stays_within_perceived_map(self, straight_model, vehicle):
        """Test that a short map forces the car to slow down instead of overrunning it."""
        config = ControlConfig.nominal()
        reference = model_curve(straight_model, 1.0, 0.04)
        solution = solve_nominal(FrenetState(vx=1.0, tau=0.3), reference, None, config, vehicle)
        assert solution.usable
        assert np.max(solution.trajectories[0, :, S]) <= 1.0 + 1e-2
        assert solution.slack_usage <= 1e-6
        assert solution.inputs[0, 1] < 0.0

    def test_warm_start_is_accepted(self, straight_map, vehicle, short_horizon):
        """Test that a previous plan can seed the next solve."""
        first = solve_nominal(FrenetState(), straight_map, None, short_horizon, vehicle)
        second = solve_nominal(FrenetState(s=0.03), straight_map, first, short_horizon, vehicle)
        assert second.usable


class TestSolveScenario:
    """Test the multi-scenario controller."""

    def _single(self, straight_map) -> ScenarioSet:
        return ScenarioSet(models=[straight_map.model], anchor=PlanarPose(), cum_arc=straight_map.cum_arc,
                           s_max=straight_map.length)

    def test_single_scenario_matches_nominal(self, straight_map, vehicle, short_horizon):
        """Test that one scenario reproduces the nominal controller."""
        scenarios = self._single(straight_map)
        car = CartesianState(x_c=0.2, y_c=0.05, vx=1.0)
        nominal = solve_nominal(FrenetState(s=0.2, eta=0.05), straight_map, None, short_horizon, vehicle)
        scenario = solve_scenario(car, scenarios, None, short_horizon, vehicle)
        assert scenario.scenarios == [0]
        assert scenario.status == nominal.status
        np.testing.assert_allclose(scenario.inputs, nominal.inputs, atol=1e-5)

    def test_single_scenario_matches_nominal_when_width_binds(self, turn_map, vehicle, short_horizon):
        """Test that one scenario reproduces the nominal controller with the track limit active."""
        scenarios = ScenarioSet(models=[turn_map.model], anchor=PlanarPose(), cum_arc=turn_map.cum_arc,
                                s_max=turn_map.length)
        car = CartesianState(x_c=0.2, y_c=0.28, vx=1.0)
        nominal = solve_nominal(FrenetState(s=0.2, eta=0.28), turn_map, None, short_horizon, vehicle)
        scenario = solve_scenario(car, scenarios, None, short_horizon, vehicle)
        assert nominal.status == SolveStatus.INFEASIBLE_RELAXED
        assert scenario.status == nominal.status
        assert scenario.slack_usage == pytest.approx(nominal.slack_usage, abs=1e-4)
        np.testing.assert_allclose(scenario.inputs, nominal.inputs, atol=1e-4)

    def test_invalid_scenario_raises(self, straight_map, vehicle, short_horizon):
        """Test that a car far behind the reference invalidates the scenario."""
        car = CartesianState(x_c=-5.0)
        with pytest.raises(ScenarioInvalidError) as info:
            solve_scenario(car, self._single(straight_map), None, short_horizon, vehicle)
        assert info.value.scenario == 0

    def test_all_scenarios_dropped(self, straight_map, vehicle, short_horizon):
        """Test that dropping every scenario is a control error."""
        car = CartesianState(x_c=-5.0)
        with pytest.raises(ControlError):
            solve_scenario(car, self._single(straight_map), None, short_horizon, vehicle, drop_invalid=True)


class TestRacingController:
    """Test the receding-horizon wrapper and its fallback."""

    def test_shift_solution(self):
        """Test that shifting drops the first stage and repeats the last."""
        shifted = shift_solution(_solution(N=4))
        np.testing.assert_array_equal(shifted.inputs[:, 0], [1.0, 2.0, 3.0, 3.0])
        np.testing.assert_array_equal(shifted.trajectories[0, :, 0], [1.0, 2.0, 3.0, 4.0, 4.0])

    def test_fallback_sequence(self, monkeypatch, straight_map, vehicle, short_horizon):
        """Test success, shifted plan, then the fallback input."""
        outcomes = [_solution(), None, None]

        def fake(*args, **kwargs):
            result = outcomes.pop(0)
            if result is None:
                raise ControlError("solver unavailable")
            return result

        monkeypatch.setattr(control, "solve_nominal", fake)
        controller = RacingController(short_horizon, vehicle)

        applied, solution = controller.plan_nominal(FrenetState(), straight_map)
        assert solution is not None
        assert applied == ControlInput(delta_rate=0.0, tau_rate=0.0)

        applied, solution = controller.plan_nominal(FrenetState(), straight_map)
        assert solution is None
        assert applied == ControlInput(delta_rate=1.0, tau_rate=-1.0)
        assert controller.failures == 1

        applied, _ = controller.plan_nominal(FrenetState(), straight_map)
        assert applied == ControlInput(delta_rate=0.0, tau_rate=-5.0)
        assert controller.failures == 2

    def test_failure_without_history(self, monkeypatch, straight_map, vehicle, short_horizon):
        """Test that a failed first solve applies the fallback input."""
        monkeypatch.setattr(control, "solve_nominal",
                            lambda *args, **kwargs: _solution(status=SolveStatus.FAILED))
        controller = RacingController(short_horizon, vehicle)
        applied, solution = controller.plan_nominal(FrenetState(), straight_map)
        assert solution is not None and not solution.usable
        assert applied == ControlInput(delta_rate=0.0, tau_rate=-5.0)

        controller.reset()
        assert controller.failures == 0
        assert controller.previous is None
