"""Suite runners: the estimation ablation and the scenario-count sweep."""

import concurrent.futures
import logging
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from racing.config import ControlConfig, ExperimentSpec
from racing.errors import RacingError
from racing.estimation import CenterlineEstimator, baseline_snapshot, map_snapshot
from racing.metrics import aggregate, compute_metrics
from racing.models import (
    CenterlineMap,
    EstimateSnapshot,
    EstimationMethod,
    MetricsTable,
    RunMetrics,
    RunMode,
    RunPerturbation,
    Track,
)
from racing.simulation import ClosedLoopSimulator, Frame
from racing.tracks import get_track


logger = logging.getLogger(__name__)


class AblationVariant(NamedTuple):
    """One estimator configuration compared in the ablation."""
    label: str
    method: EstimationMethod
    initialize: bool = True
    regularize: bool = False


ABLATION_VARIANTS: Tuple[AblationVariant, ...] = (
    AblationVariant("naive", EstimationMethod.NAIVE),
    AblationVariant("smooth-naive", EstimationMethod.SMOOTH_NAIVE),
    AblationVariant("ours", EstimationMethod.OURS, initialize=True, regularize=True),
    AblationVariant("ours (no reg)", EstimationMethod.OURS, initialize=True, regularize=False),
    AblationVariant("ours (no init)", EstimationMethod.OURS, initialize=False, regularize=True),
    AblationVariant("ours (no init, no reg)", EstimationMethod.OURS, initialize=False, regularize=False),
)

ProgressCallback = Callable[[int, int], None]


def draw_perturbation(spec: ExperimentSpec, seed: int) -> RunPerturbation:
    """Initial-state, weight and inertia variation of one run."""
    cfg = spec.ablation
    rng = np.random.default_rng([seed, 1])
    return RunPerturbation(
        lateral_offset=float(rng.uniform(-cfg.lateral_offset, cfg.lateral_offset)),
        heading_offset=float(rng.uniform(-cfg.heading_offset, cfg.heading_offset)),
        weight_scale=tuple(float(w) for w in rng.uniform(*cfg.weight_range, size=3)),
        mass_scale=float(rng.uniform(*cfg.mass_range)),
        inertia_scale=float(rng.uniform(*cfg.mass_range)),
    )


def replay_estimation(frames: Sequence[Frame], variant: AblationVariant, spec: ExperimentSpec
                      ) -> List[EstimateSnapshot]:
    """Run one estimator variant over recorded measurements."""
    config = spec.estimator.model_copy(update={"initialize": variant.initialize,
                                               "regularize": variant.regularize})
    snapshots: List[EstimateSnapshot] = []
    if variant.method != EstimationMethod.OURS:
        for frame in frames:
            snapshot = baseline_snapshot(frame.car, frame.measurement, variant.method, config, frame.tick)
            if snapshot is not None:
                snapshots.append(snapshot)
        return snapshots

    estimator = CenterlineEstimator(config)
    centerline: Optional[CenterlineMap] = None
    for frame in frames:
        outcome = estimator.step(frame.car, frame.measurement, centerline)
        if outcome.updated and outcome.map is not None:
            centerline = outcome.map
            snapshots.append(map_snapshot(centerline, frame.tick))
    return snapshots


def _failed_metrics() -> RunMetrics:
    return RunMetrics(success=False, mean_hausdorff=float("inf"), worst_hausdorff=float("inf"),
                      kappa_mae=float("inf"), mean_abs_eta=float("inf"), max_eta=float("inf"))


def _resolve_track(track: Union[str, Track]) -> Track:
    return track if isinstance(track, Track) else get_track(track)


def ablation_run(spec: ExperimentSpec, track_name: Union[str, Track], seed: int) -> Dict[str, RunMetrics]:
    """Drive one perturbed ground-truth lap and score every estimator variant on its measurements."""
    track = _resolve_track(track_name)
    track_name = track.name
    simulator = ClosedLoopSimulator(
        track, spec.resolved_vehicle(), spec.estimator, spec.sampling,
        spec.resolved_control(), spec.sensor,
        spec.simulation.model_copy(update={"method": EstimationMethod.OURS}),
        RunMode.GROUND_TRUTH, seed, draw_perturbation(spec, seed),
    )
    scores: Dict[str, RunMetrics] = {}
    try:
        result = simulator.run()
    except (RacingError, ValueError) as e:
        logger.error(f"Ablation run on {track_name} seed {seed} failed: {e}")
        return {variant.label: _failed_metrics() for variant in ABLATION_VARIANTS}
    for variant in ABLATION_VARIANTS:
        try:
            estimates = replay_estimation(simulator.frames, variant, spec)
            scores[variant.label] = compute_metrics(result.log, estimates, simulator.geometry, spec.simulation)
        except (RacingError, ValueError) as e:
            logger.error(f"Ablation variant '{variant.label}' failed on {track_name} seed {seed}: {e}")
            scores[variant.label] = _failed_metrics()
    return scores


def sweep_run(spec: ExperimentSpec, track: Union[str, Track], seed: int, m: int) -> RunMetrics:
    """One uncertainty-aware lap with m scenarios; a crashed run scores as a failure."""
    resolved = _resolve_track(track)
    sampling = spec.sampling.model_copy(update={"m": m})
    control = spec.control or ControlConfig.uncertainty_aware()
    simulator = ClosedLoopSimulator(
        resolved, spec.resolved_vehicle(), spec.estimator, sampling, control, spec.sensor,
        spec.simulation, RunMode.UNCERTAINTY_AWARE, seed,
    )
    try:
        return simulator.run().metrics
    except (RacingError, ValueError) as e:
        logger.error(f"Sweep run m={m} seed {seed} on {resolved.name} failed: {e}")
        return _failed_metrics()


def _run_jobs(jobs: List[Tuple[Callable, tuple]], workers: int,
              progress: Optional[ProgressCallback] = None) -> List[object]:
    """Execute independent runs, in a process pool when more than one worker is allowed."""
    results: List[object] = [None] * len(jobs)
    if workers <= 1 or len(jobs) <= 1:
        for index, (func, args) in enumerate(jobs):
            results[index] = func(*args)
            if progress:
                progress(index + 1, len(jobs))
        return results

    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        future_to_index = {executor.submit(func, *args): index for index, (func, args) in enumerate(jobs)}
        done = 0
        for future in concurrent.futures.as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
            done += 1
            if progress:
                progress(done, len(jobs))
    return results


def run_seeds(spec: ExperimentSpec) -> List[int]:
    """Seeds of the suite: the configured list, extended consecutively to n_runs."""
    seeds = list(spec.seeds)
    while len(seeds) < spec.ablation.n_runs:
        seeds.append(seeds[-1] + 1)
    return seeds[: spec.ablation.n_runs]


def ablation_suite(spec: ExperimentSpec, workers: int = 1,
                   progress: Optional[ProgressCallback] = None) -> List[MetricsTable]:
    """Table of every estimator variant on every track, aggregated over the seeded runs."""
    seeds = run_seeds(spec)
    keys = [(track, seed) for track in spec.ablation.tracks for seed in seeds]
    logger.info(f"Ablation: {len(keys)} run(s) on {len(spec.ablation.tracks)} track(s), {workers} worker(s)")
    outcomes = _run_jobs([(ablation_run, (spec, track, seed)) for track, seed in keys], workers, progress)

    tables: List[MetricsTable] = []
    for track in spec.ablation.tracks:
        per_run = [scores for (name, _), scores in zip(keys, outcomes) if name == track]
        for variant in ABLATION_VARIANTS:
            runs = [scores[variant.label] for scores in per_run]  # type: ignore[index]
            tables.append(aggregate(variant.label, track, runs))
    return tables


def scenario_sweep(spec: ExperimentSpec, workers: int = 1,
                   progress: Optional[ProgressCallback] = None) -> List[MetricsTable]:
    """Tracking quality of the uncertainty-aware controller for each scenario count."""
    seeds = run_seeds(spec)
    track = _resolve_track(spec.track)
    keys = [(m, seed) for m in spec.ablation.m_values for seed in seeds]
    logger.info(f"Scenario sweep on {track.name}: m in {spec.ablation.m_values}, {len(seeds)} seed(s) each")
    outcomes = _run_jobs([(sweep_run, (spec, track, seed, m)) for m, seed in keys], workers, progress)
    return [aggregate(f"m = {m}", track.name, [r for (mm, _), r in zip(keys, outcomes) if mm == m])  # type: ignore[misc]
            for m in spec.ablation.m_values]
