"""Closed-loop racing: sense, estimate, sample, control and actuate at a fixed rate."""

import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from racing.config import (
    ControlConfig,
    EstimatorConfig,
    SamplingConfig,
    SensorConfig,
    SimulationConfig,
    VehicleParams,
)
from racing.control import RacingController
from racing.errors import RacingError, VehicleError
from racing.estimation import CenterlineEstimator, baseline_snapshot, map_snapshot
from racing.models import (
    CartesianState,
    CenterlineMap,
    ControlInput,
    EstimateSnapshot,
    EstimationMethod,
    Measurement,
    RunMode,
    RunPerturbation,
    RunResult,
    ScenarioSet,
    Solution,
    TickRecord,
    Track,
)
from racing.metrics import compute_metrics
from racing.sampling import sample_scenarios
from racing.sensor import sense
from racing.tracks import TrackGeometry, TrackLocation, truth_reference
from racing.vehicle import step


logger = logging.getLogger(__name__)

TRUTH_SPACING = 0.02
TRUTH_BEHIND = 0.3
MIN_LOOKAHEAD = 0.5


class Frame(NamedTuple):
    """What the car saw at one tick; replayed by the ablation suite."""
    tick: int
    car: CartesianState
    measurement: Measurement


def tick_seed(seed: int, tick: int) -> int:
    """Independent per-tick seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, tick]).generate_state(1)[0])


def start_state(geometry: TrackGeometry, config: SimulationConfig,
                perturbation: Optional[RunPerturbation] = None) -> CartesianState:
    """Car placed on the centerline at start_offset, shifted laterally and rotated by the perturbation."""
    perturbation = perturbation or RunPerturbation()
    pose = geometry.pose(config.start_offset)
    return CartesianState(
        x_c=pose.x - perturbation.lateral_offset * math.sin(pose.alpha),
        y_c=pose.y + perturbation.lateral_offset * math.cos(pose.alpha),
        psi=pose.alpha + perturbation.heading_offset,
        vx=config.initial_speed,
    )


def perturbed_control(config: ControlConfig, perturbation: RunPerturbation) -> ControlConfig:
    q_s, q_eta, q_phi = perturbation.weight_scale
    return config.model_copy(update={
        "q_s": config.q_s * q_s, "q_eta": config.q_eta * q_eta, "q_phi": config.q_phi * q_phi,
    })


class ClosedLoopSimulator:
    """One closed-loop run on a ground-truth track.

    The controller predicts with (possibly perturbed) vehicle parameters while the
    simulated car always uses the nominal ones. Actuator states are saturated to
    the controller's boxes after every step.
    """

    def __init__(self, track: Track, params: VehicleParams, estimator: EstimatorConfig,
                 sampling: SamplingConfig, control: ControlConfig, sensor: SensorConfig,
                 simulation: SimulationConfig, mode: RunMode = RunMode.NOMINAL, seed: int = 0,
                 perturbation: Optional[RunPerturbation] = None) -> None:
        self.track = track
        self.geometry = TrackGeometry(track)
        self.params = params
        self.perturbation = perturbation or RunPerturbation()
        self.estimator_config = estimator
        self.sampling = sampling
        self.control = perturbed_control(control, self.perturbation)
        self.sensor = sensor.model_copy(update={"seed": tick_seed(sensor.seed, seed)})
        self.simulation = simulation
        self.mode = mode
        self.seed = seed
        self.method = simulation.method
        if mode != RunMode.GROUND_TRUTH and self.method != EstimationMethod.OURS:
            raise ValueError(f"mode {mode.value} drives on the model-based estimate; method must be 'ours'")
        self.frames: List[Frame] = []
        self._scenarios: Optional[ScenarioSet] = None

    def _reference_window(self, s_abs: float, estimate: Optional[EstimateSnapshot]) -> CenterlineMap:
        """True centerline from just behind the car to the end of the current estimate."""
        ahead = self.sensor.max_range
        if estimate is not None and len(estimate.points):
            here = self.geometry.locate(*estimate.points[-1]).s
            ahead = (here - s_abs) % self.geometry.length
            if ahead > 0.5 * self.geometry.length:
                ahead = 0.0
        ahead = max(ahead, MIN_LOOKAHEAD)
        return truth_reference(self.geometry, s_abs - TRUTH_BEHIND, s_abs + ahead,
                               TRUTH_SPACING, self.simulation.truth_steepness)

    def _saturate(self, car: CartesianState) -> CartesianState:
        c = self.control
        delta = float(np.clip(car.delta, *c.delta_bounds))
        tau = float(np.clip(car.tau, *c.tau_bounds))
        if delta == car.delta and tau == car.tau:
            return car
        return car.model_copy(update={"delta": delta, "tau": tau})

    def run(self) -> RunResult:
        sim = self.simulation
        geometry = self.geometry
        controller = RacingController(self.control, self.params.scaled(self.perturbation.mass_scale,
                                                                        self.perturbation.inertia_scale))
        estimator = CenterlineEstimator(self.estimator_config)
        car = start_state(geometry, sim, self.perturbation)
        start_s = geometry.locate(car.x_c, car.y_c).s
        previous_s = start_s
        progress = 0.0
        centerline: Optional[CenterlineMap] = None
        latest: Optional[EstimateSnapshot] = None
        self._scenarios = None
        result = RunResult(track=self.track.name, mode=self.mode, method=self.method, seed=self.seed)
        termination = "tick-budget"
        lap_length = sim.laps * geometry.length
        logger.info(f"Run started: {self.track.name}, mode {self.mode.value}, seed {self.seed}")

        for tick in range(sim.max_ticks):
            here: TrackLocation = geometry.locate(car.x_c, car.y_c)
            coord = here.frenet(car.psi)
            delta_s = (here.s - previous_s + 0.5 * geometry.length) % geometry.length - 0.5 * geometry.length
            progress += delta_s
            previous_s = here.s
            record = dict(
                tick=tick, time=tick * sim.dt, x_c=car.x_c, y_c=car.y_c, psi=car.psi,
                vx=car.vx, vy=car.vy, r=car.r, delta=car.delta, tau=car.tau,
                s_true=coord.s, eta_true=coord.eta, phi_true=coord.phi,
                progress=progress,
            )
            if progress >= lap_length:
                result.log.append(TickRecord(**record))
                termination = "lap-complete"
                break
            if abs(here.eta) > sim.divergence_factor * self.track.width:
                result.log.append(TickRecord(**record))
                termination = "diverged"
                break
            if car.vx < sim.stall_speed:
                result.log.append(TickRecord(**record))
                termination = "stalled"
                break

            measurement = sense(car, geometry, self.sensor, tick)
            self.frames.append(Frame(tick, car, measurement))
            updated = False
            if self.method == EstimationMethod.OURS:
                outcome = estimator.step(car, measurement, centerline)
                if outcome.updated and outcome.map is not None:
                    centerline = outcome.map
                    latest = map_snapshot(centerline, tick)
                    result.estimates.append(latest)
                    updated = True
                    self._scenarios = None
                if outcome.diagnostics is not None and outcome.updated:
                    result.estimation_diagnostics.append(outcome.diagnostics)
            else:
                snapshot = baseline_snapshot(car, measurement, self.method, self.estimator_config, tick)
                if snapshot is not None:
                    latest = snapshot
                    result.estimates.append(snapshot)
                    updated = True

            control, solution, n_scenarios = self._plan(controller, car, progress + start_s, latest,
                                                        centerline, tick)
            if solution is not None:
                result.solve_diagnostics.append(_solve_record(tick, solution))

            status = solution.status.value if solution is not None and solution.usable else "failed"
            result.log.append(TickRecord(
                **record, delta_rate=control.delta_rate, tau_rate=control.tau_rate, status=status,
                slack=solution.slack_usage if solution is not None else 0.0,
                estimate_updated=updated, n_scenarios=n_scenarios,
            ))
            try:
                car = self._saturate(step(car, control, None, self.params, sim.dt, sim.substeps))
            except VehicleError as e:
                logger.warning(f"Run {self.seed}: simulation stopped at tick {tick}: {e}")
                termination = "diverged"
                break

        result.termination = termination
        result.metrics = compute_metrics(result.log, result.estimates, geometry, sim)
        logger.info(f"Run finished: {self.track.name} seed {self.seed} ({termination}), "
                    f"{len(result.log)} ticks, max |eta| {result.metrics.max_eta:.3f} m")
        return result

    def _plan(self, controller: RacingController, car: CartesianState, s_abs: float,
              latest: Optional[EstimateSnapshot], centerline: Optional[CenterlineMap],
              tick: int) -> Tuple[ControlInput, Optional[Solution], int]:
        """Controller input for this tick and the solve behind it."""
        if self.mode == RunMode.GROUND_TRUTH:
            control, solution = controller.plan_reference(car, self._reference_window(s_abs, latest))
            return control, solution, 1
        if centerline is None:
            return ControlInput(), None, 0
        if self.mode == RunMode.NOMINAL:
            control, solution = controller.plan_reference(car, centerline)
            return control, solution, 1
        if self._scenarios is None:
            config = self.sampling.model_copy(update={"seed": tick_seed(self.seed, tick)})
            try:
                self._scenarios = sample_scenarios(centerline, config)
            except RacingError as e:
                logger.warning(f"Scenario sampling failed at tick {tick}: {e}")
                control, solution = controller.plan_reference(car, centerline)
                return control, solution, 1
        control, solution = controller.plan_scenarios(car, self._scenarios)
        used = len(solution.scenarios) if solution is not None else self._scenarios.m
        return control, solution, used


def _solve_record(tick: int, solution: Solution) -> dict:
    return {
        "tick": tick,
        "status": solution.status.value,
        "iterations": solution.iterations,
        "kkt_residual": solution.kkt_residual,
        "slack_usage": solution.slack_usage,
        "cost": solution.cost,
        "max_constraint_violation": solution.max_constraint_violation,
        "scenarios": list(solution.scenarios),
        "message": solution.message,
    }


def run_closed_loop(track: Track, params: VehicleParams, estimator: EstimatorConfig, sampling: SamplingConfig,
                    control: ControlConfig, sensor: SensorConfig, simulation: SimulationConfig,
                    mode: RunMode = RunMode.NOMINAL, seed: int = 0,
                    perturbation: Optional[RunPerturbation] = None) -> RunResult:
    """Run one closed-loop experiment and return its log, estimates and metrics."""
    simulator = ClosedLoopSimulator(track, params, estimator, sampling, control, sensor, simulation,
                                    mode, seed, perturbation)
    return simulator.run()
