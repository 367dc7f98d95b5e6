"""Centerline estimation: sigmoid-model fits, overlap-gated map updates and baselines."""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import savgol_filter

from racing.config import EstimatorConfig
from racing.curvature_model import (
    check_constraints,
    curvature_function,
    evaluate,
    fold_and_shift,
    from_vector,
    prune,
    to_vector,
)
from racing.errors import (
    EmptySetError,
    GeometryError,
    InfeasibleError,
    InsufficientDataError,
    PreconditionError,
    RacingError,
)
from racing.geometry import (
    discrete_curvature,
    distances_to_polyline,
    integrate_curve,
    project_point,
    resample,
)
from racing.models import (
    CartesianState,
    CenterlineMap,
    CurvatureModel,
    EstimateSnapshot,
    EstimationDiagnostics,
    EstimationMethod,
    EstimationOutcome,
    Measurement,
    OverlapReport,
    PlanarPose,
    Polyline,
    RetainedMap,
    SigmoidParams,
)
from racing.solver import AugmentedLagrangianSolver, CurvatureFitProblem


logger = logging.getLogger(__name__)

SMOOTH_WINDOW = 5
SMOOTH_ORDER = 2


def subsample(points: Polyline, spacing: float) -> Polyline:
    """Greedy arc-length subsampling: keep the point whose gap is nearest to `spacing`."""
    if len(points) == 0:
        raise EmptySetError("cannot subsample an empty polyline")
    if spacing <= 0.0:
        raise PreconditionError("subsample spacing must be positive")
    arc = points.cum_arc
    n = len(points)
    kept = [0]
    while True:
        last = kept[-1]
        target = arc[last] + spacing
        j = int(np.searchsorted(arc, target, side="left"))
        if j >= n:
            if n - 1 > last and arc[-1] - arc[last] >= 0.5 * spacing:
                kept.append(n - 1)
            break
        if j - 1 > last and target - arc[j - 1] <= arc[j] - target:
            j -= 1
        kept.append(j)
    return Polyline.from_points(points.points[kept])


def smooth_points(points: np.ndarray) -> np.ndarray:
    """Savitzky-Golay smoothing of x and y, skipped for short inputs."""
    if len(points) < SMOOTH_WINDOW:
        return np.array(points, dtype=float)
    return np.column_stack((savgol_filter(points[:, 0], SMOOTH_WINDOW, SMOOTH_ORDER),
                            savgol_filter(points[:, 1], SMOOTH_WINDOW, SMOOTH_ORDER)))


def _window_changes(kappa: np.ndarray, window: int) -> Tuple[np.ndarray, np.ndarray]:
    """Difference of the mean curvature after and before each interior boundary."""
    n = len(kappa)
    if n < 2 * window:
        return np.zeros(0, dtype=int), np.zeros(0)
    csum = np.concatenate(([0.0], np.cumsum(kappa)))
    idx = np.arange(window, n - window + 1)
    before = (csum[idx] - csum[idx - window]) / window
    after = (csum[idx + window] - csum[idx]) / window
    return idx, after - before


def _detect_transitions(arc: np.ndarray, kappa: np.ndarray, config: EstimatorConfig) -> List[float]:
    idx, change = _window_changes(kappa, config.init_window)
    above = np.abs(change) > config.change_threshold
    runs: List[Tuple[float, float]] = []
    start = None
    for k in range(len(idx) + 1):
        boundary = (k == len(idx) or not above[k]
                    or (start is not None and np.sign(change[k]) != np.sign(change[start])))
        if start is not None and boundary:
            sel = slice(start, k)
            weights = np.abs(change[sel])
            positions = 0.5 * (arc[idx[sel] - 1] + arc[idx[sel]])
            runs.append((float(np.max(weights)), float(np.average(positions, weights=weights))))
            start = None
        if k < len(idx) and above[k] and start is None:
            start = k

    chosen: List[float] = []
    for _, location in sorted(runs, reverse=True):
        if all(abs(location - other) >= config.min_transition_gap for other in chosen):
            chosen.append(location)
        if len(chosen) >= config.max_sigmoids:
            break
    return sorted(chosen)


def _segment_levels(arc: np.ndarray, kappa: np.ndarray, transitions: List[float], guard: float) -> List[float]:
    edges = [-np.inf, *transitions, np.inf]
    levels = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        inside = (arc >= lo) & (arc < hi)
        clear = inside & (arc >= lo + guard) & (arc < hi - guard)
        if np.any(clear):
            levels.append(float(np.mean(kappa[clear])))
        elif np.any(inside):
            levels.append(float(np.mean(kappa[inside])))
        else:
            nearest = int(np.argmin(np.abs(arc - 0.5 * (max(lo, arc[0]) + min(hi, arc[-1])))))
            levels.append(float(kappa[nearest]))
    return levels


def initialize_model(points: Polyline, config: EstimatorConfig) -> CurvatureModel:
    """Initial sigmoid model from thresholded changes of discrete curvature."""
    if len(points) < 3:
        raise InsufficientDataError(f"initialization needs at least 3 points, got {len(points)}")
    coarse = resample(points, config.init_spacing)
    if len(coarse) < 3:
        coarse = points
    smoothed = Polyline.from_points(smooth_points(coarse.points))
    arc = coarse.cum_arc
    kappa = discrete_curvature(smoothed)
    length = points.length

    transitions = _detect_transitions(arc, kappa, config)
    lo, hi = config.kappa_bounds
    margin = config.solver.kappa_margin
    if not transitions:
        kappa0 = float(np.clip(np.mean(kappa), lo + margin, hi - margin))
        return CurvatureModel(kappa0=kappa0, bounds=config.kappa_bounds,
                              sigmoids=[SigmoidParams(a=0.0, b=0.5 * length, c=config.c_fixed)])

    levels = np.clip(_segment_levels(arc, kappa, transitions, 1.5 * config.init_spacing),
                     lo + margin, hi - margin)
    amplitudes = np.clip(np.diff(levels), lo, hi)
    sigmoids = [SigmoidParams(a=float(a), b=float(np.clip(b, 0.0, length)), c=config.c_fixed)
                for a, b in zip(amplitudes, transitions)]
    logger.debug(f"Initialized {len(sigmoids)} transition(s) at {[round(b, 3) for b in transitions]}")
    return CurvatureModel(kappa0=float(levels[0]), sigmoids=sigmoids, bounds=config.kappa_bounds)


def uninformed_model(points: Polyline, config: EstimatorConfig) -> CurvatureModel:
    """Keep only the sigmoid count from initialization; zero levels, even spacing."""
    n = initialize_model(points, config).n_sigmoids
    length = points.length
    sigmoids = [SigmoidParams(a=0.0, b=length * (i + 1) / (n + 1), c=config.c_fixed) for i in range(n)]
    return CurvatureModel(kappa0=0.0, sigmoids=sigmoids, bounds=config.kappa_bounds)


def determine_overlap(measurement: Measurement, centerline: CenterlineMap,
                      config: EstimatorConfig) -> OverlapReport:
    """Match a measurement against the map and decide whether it both overlaps and extends it."""
    points = measurement.points.points
    if len(points) == 0 or len(centerline.points) == 0:
        raise EmptySetError("overlap needs a non-empty measurement and map")
    to_map = distances_to_polyline(points, centerline.points)
    to_measurement = distances_to_polyline(centerline.points, points)
    matched = np.flatnonzero(to_map < config.overlap_dist)
    matched_map = np.flatnonzero(to_measurement < config.overlap_dist)
    if len(matched) == 0:
        return OverlapReport(overlap=False, new_points=len(points))

    new_points = len(points) - int(matched[-1]) - 1
    overlap = (len(matched) >= config.min_overlap_points
               and len(matched_map) >= config.min_overlap_points
               and new_points >= config.min_new_points)
    return OverlapReport(
        overlap=overlap,
        map_range=(int(matched_map[0]), int(matched_map[-1])) if len(matched_map) else (-1, -1),
        measurement_range=(int(matched[0]), int(matched[-1])),
        matched_map=len(matched_map),
        matched_measurement=len(matched),
        new_points=new_points,
    )


def _first_heading(points: np.ndarray, kappa0: float) -> float:
    k = min(3, len(points) - 1)
    chord = points[k] - points[0]
    return math.atan2(chord[1], chord[0]) - 0.5 * kappa0 * float(np.hypot(*chord))


class CenterlineEstimator:
    """Runs the per-step estimation loop and records solver diagnostics."""

    def __init__(self, config: Optional[EstimatorConfig] = None) -> None:
        self.config = config or EstimatorConfig()
        self.solver = AugmentedLagrangianSolver(self.config.solver)
        self.history: List[EstimationDiagnostics] = []
        self.time_index = 0

    def _start_model(self, points: Polyline) -> CurvatureModel:
        if self.config.initialize:
            return initialize_model(points, self.config)
        return uninformed_model(points, self.config)

    def _finalize(self, model: CurvatureModel, length: float) -> CurvatureModel:
        violations = check_constraints(model, (0.0, length), self.config.delta_lambda)
        if violations:
            raise InfeasibleError("; ".join(v.describe() for v in violations))
        pruned = prune(model, self.config.prune_threshold)
        if check_constraints(pruned, (0.0, length), self.config.delta_lambda):
            return model
        return pruned

    def _fit(self, targets: np.ndarray, steps: np.ndarray, alpha0: float,
             start: CurvatureModel, kind: str, s_origin: float) -> CenterlineMap:
        cfg = self.config
        steepness = np.array([p.c for p in start.sigmoids], dtype=float)
        problem = CurvatureFitProblem(
            targets, steps, steepness, cfg.kappa_bounds, cfg.delta_lambda,
            reg_weight=cfg.reg_weight if cfg.regularize else 0.0,
            smooth_eps=cfg.smooth_abs_eps, ordering_gap=cfg.solver.ordering_gap,
            kappa_margin=cfg.solver.kappa_margin,
            rule=cfg.chord_rule,
        )
        theta0 = np.concatenate(([alpha0], to_vector(start)))
        theta, diagnostics = self.solver.solve(problem, theta0, kind=kind, time_index=self.time_index)
        self.history.append(diagnostics)

        model = self._finalize(from_vector(theta[1:], steepness, cfg.kappa_bounds), problem.length)
        anchor = PlanarPose(alpha=float(theta[0]), x=float(targets[0, 0]), y=float(targets[0, 1]))
        mu = integrate_curve(anchor, curvature_function(model), steps, cfg.chord_rule)
        logger.info(f"{kind.capitalize()} fit at step {self.time_index}: {model.n_sigmoids} sigmoid(s), "
                    f"objective {diagnostics.objective:.3e}, {len(targets)} points")
        return CenterlineMap(mu=mu, cum_arc=np.concatenate(([0.0], np.cumsum(steps))),
                             model=model, s_origin=s_origin)

    def fit_initial(self, measurement: Measurement) -> CenterlineMap:
        """Fit a first map to one measurement, pinning the map start to its first point."""
        points = subsample(measurement.points, self.config.delta_lambda)
        if len(points) < self.config.min_fit_points:
            raise InsufficientDataError(
                f"initial fit needs {self.config.min_fit_points} points, got {len(points)}")
        start = self._start_model(points)
        alpha0 = _first_heading(points.points, start.kappa0)
        return self._fit(points.points, np.diff(points.cum_arc), alpha0, start, "initial", 0.0)

    def determine_overlap(self, measurement: Measurement, centerline: CenterlineMap) -> OverlapReport:
        return determine_overlap(measurement, centerline, self.config)

    def retain_map(self, car_state: CartesianState, measurement: Measurement,
                   centerline: CenterlineMap, overlap: OverlapReport) -> RetainedMap:
        """Cut the map one curve behind the car, fold old transitions and collect new points."""
        if not overlap.overlap:
            raise PreconditionError("retain_map requires an overlapping measurement")
        cfg = self.config
        arc = centerline.cum_arc
        try:
            s_car, _ = project_point(centerline, car_state.x_c, car_state.y_c, extrapolate=centerline.length)
        except GeometryError:
            s_car = 0.0

        _, b, _ = centerline.model.arrays()
        behind = b[b < s_car]
        cut_index = 0
        if len(behind) >= 2:
            cut = 0.5 * (behind[-2] + behind[-1])
            cut_index = int(np.searchsorted(arc, cut, side="right")) - 1

        new = measurement.points.points[overlap.measurement_range[1] + 1:]
        new = new[np.hypot(*(new - centerline.points[-1]).T) > 1e-6] if len(new) else new
        new_line = Polyline.from_points(np.vstack((centerline.points[-1:], new)))
        excess = (centerline.length - arc[cut_index]) + new_line.length - cfg.map_length_cap
        if excess > 0.0:
            cap_index = int(np.searchsorted(arc, arc[cut_index] + excess - 1e-12, side="left"))
            cut_index = max(cut_index, cap_index)
        cut_index = min(cut_index, len(arc) - 2)

        retained_length = arc[-1] - arc[cut_index]
        room = cfg.map_length_cap - retained_length
        keep = new_line.cum_arc[1:] <= room + 1e-12
        new = new[: int(np.argmin(keep)) if not np.all(keep) else len(new)]

        cut_arc = float(arc[cut_index])
        model, folded = fold_and_shift(centerline.model, cut_arc)
        if folded:
            logger.debug(f"Folded {folded} sigmoid(s) behind s={cut_arc:.3f} m")
        return RetainedMap(
            points=Polyline.from_points(centerline.points[cut_index:]),
            arc=arc[cut_index:] - cut_arc,
            model=model,
            new_points=Polyline.from_points(new),
            alpha0=float(centerline.mu[cut_index, 0]),
            s_origin=centerline.s_origin + cut_arc,
            folded=folded,
        )

    def _warm_start(self, retained: RetainedMap, junction: float, total: float) -> CurvatureModel:
        cfg = self.config
        lo, hi = cfg.kappa_bounds
        end = float(retained.arc[-1])
        sigmoids = list(retained.model.sigmoids)
        added: List[SigmoidParams] = []
        new = retained.new_points
        if len(new) >= 3:
            start = self._start_model(new)
            if cfg.initialize:
                step = start.kappa0 - evaluate(retained.model, end)
                if abs(step) > cfg.change_threshold:
                    added.append(SigmoidParams(a=float(np.clip(step, lo, hi)), b=end, c=cfg.c_fixed))
            added.extend(SigmoidParams(a=p.a, b=p.b + junction, c=p.c) for p in start.sigmoids)
        if not added:
            added.append(SigmoidParams(a=0.0, b=0.5 * (end + total), c=cfg.c_fixed))

        merged: List[SigmoidParams] = []
        gap = 2.0 * cfg.solver.ordering_gap
        for p in sorted(sigmoids + added, key=lambda q: q.b):
            b = float(np.clip(p.b, 0.0, total))
            if merged and b < merged[-1].b + gap:
                continue
            merged.append(SigmoidParams(a=p.a, b=b, c=p.c))
        while len(merged) > cfg.max_sigmoids:
            weakest = min(range(len(merged)), key=lambda i: abs(merged[i].a))
            merged.pop(weakest)
        return CurvatureModel(kappa0=retained.model.kappa0, sigmoids=merged, bounds=cfg.kappa_bounds)

    def fit_update(self, retained: RetainedMap) -> CenterlineMap:
        """Refit the retained map together with new observations, keeping its first point fixed."""
        if len(retained.points) == 0:
            raise PreconditionError("fit_update needs retained map points")
        if len(retained.new_points) == 0:
            raise PreconditionError("fit_update needs new points")
        new = retained.new_points.points
        junction_gap = float(np.hypot(*(new[0] - retained.points.points[-1])))
        steps = np.concatenate((np.diff(retained.arc), [junction_gap], np.diff(retained.new_points.cum_arc)))
        targets = np.vstack((retained.points.points, new))
        junction = float(retained.arc[-1]) + junction_gap
        total = float(np.sum(steps))
        start = self._warm_start(retained, junction, total)
        return self._fit(targets, steps, retained.alpha0, start, "update", retained.s_origin)

    def prepare(self, car_state: CartesianState, measurement: Measurement) -> Measurement:
        """Drop points beyond the map length cap from the car, then subsample."""
        points = measurement.points.points
        near = np.hypot(points[:, 0] - car_state.x_c, points[:, 1] - car_state.y_c) <= self.config.map_length_cap
        if not np.all(near):
            points = points[: int(np.argmin(near))] if near[0] else points[near]
        if len(points) == 0:
            return Measurement(points=Polyline.from_points(np.zeros((0, 2))), time_index=measurement.time_index)
        line = subsample(Polyline.from_points(points), self.config.delta_lambda)
        return Measurement(points=line, time_index=measurement.time_index)

    def step(self, car_state: CartesianState, measurement: Measurement,
             previous: Optional[CenterlineMap]) -> EstimationOutcome:
        """One pass of the estimation loop; failures keep the previous map."""
        self.time_index = measurement.time_index
        if measurement.is_empty:
            return EstimationOutcome(map=previous, error="empty measurement")
        overlap: Optional[OverlapReport] = None
        try:
            observed = self.prepare(car_state, measurement)
            if observed.is_empty:
                return EstimationOutcome(map=previous, error="no measurement points within range")
            if previous is None:
                centerline = self.fit_initial(observed)
                return EstimationOutcome(map=centerline, updated=True, diagnostics=self.history[-1])
            overlap = self.determine_overlap(observed, previous)
            if not overlap.overlap:
                return EstimationOutcome(map=previous, overlap=overlap)
            retained = self.retain_map(car_state, observed, previous, overlap)
            centerline = self.fit_update(retained)
            return EstimationOutcome(map=centerline, updated=True, overlap=overlap,
                                     diagnostics=self.history[-1])
        except RacingError as e:
            logger.warning(f"Estimation at step {self.time_index} failed, keeping previous map: {e}")
            return EstimationOutcome(map=previous, overlap=overlap, error=str(e))


def fit_initial(measurement: Measurement, config: EstimatorConfig) -> CenterlineMap:
    return CenterlineEstimator(config).fit_initial(measurement)


def retain_map(car_state: CartesianState, measurement: Measurement, centerline: CenterlineMap,
               overlap: OverlapReport, config: EstimatorConfig) -> RetainedMap:
    return CenterlineEstimator(config).retain_map(car_state, measurement, centerline, overlap)


def fit_update(retained: RetainedMap, config: EstimatorConfig) -> CenterlineMap:
    return CenterlineEstimator(config).fit_update(retained)


def estimation_step(car_state: CartesianState, measurement: Measurement,
                    previous: Optional[CenterlineMap], config: EstimatorConfig) -> EstimationOutcome:
    return CenterlineEstimator(config).step(car_state, measurement, previous)


def map_snapshot(centerline: CenterlineMap, tick: int) -> EstimateSnapshot:
    """Uniform estimate view of a model-based map."""
    return EstimateSnapshot(
        tick=tick, method=EstimationMethod.OURS, points=np.array(centerline.points),
        kappa=np.asarray(evaluate(centerline.model, centerline.cum_arc)),
        cum_arc=np.array(centerline.cum_arc), model=centerline.model, s_origin=centerline.s_origin,
    )


def baseline_snapshot(car_state: CartesianState, measurement: Measurement, method: EstimationMethod,
                      config: EstimatorConfig, tick: int) -> Optional[EstimateSnapshot]:
    """Estimate view of the naive baselines: discrete curvature on raw or smoothed points."""
    observed = CenterlineEstimator(config).prepare(car_state, measurement)
    if len(observed.points) < 3:
        return None
    points = observed.points.points
    if method == EstimationMethod.SMOOTH_NAIVE:
        points = smooth_points(points)
    line = Polyline.from_points(points)
    try:
        kappa = discrete_curvature(line)
    except GeometryError as e:
        logger.warning(f"Baseline estimate at tick {tick} skipped: {e}")
        return None
    return EstimateSnapshot(tick=tick, method=method, points=np.array(line.points), kappa=kappa,
                            cum_arc=np.array(line.cum_arc))
