"""Run metrics against ground truth and their aggregation over runs."""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from racing.config import SimulationConfig
from racing.geometry import hausdorff_distance
from racing.models import EstimateSnapshot, MetricSummary, MetricsTable, RunMetrics, TickRecord, Track
from racing.tracks import TrackGeometry


logger = logging.getLogger(__name__)

TRUTH_SPACING = 0.005
COVERAGE_BIN = 0.05
FAILED_STATUS = "failed"


def _geometry(track: Union[Track, TrackGeometry]) -> TrackGeometry:
    return track if isinstance(track, TrackGeometry) else TrackGeometry(track)


def estimate_window(estimate: EstimateSnapshot, geometry: TrackGeometry) -> Tuple[float, float]:
    """Track arc range covered by an estimate, from its first to its last point (end may exceed a lap)."""
    first = geometry.locate(*estimate.points[0]).s
    last = geometry.locate(*estimate.points[-1]).s
    return first, first + (last - first) % geometry.length


def estimate_errors(estimate: EstimateSnapshot, geometry: TrackGeometry) -> Tuple[float, float]:
    """Hausdorff distance to the matching ground-truth section and curvature MAE on the estimate's grid."""
    start, end = estimate_window(estimate, geometry)
    count = max(int(np.ceil((end - start) / TRUTH_SPACING)), 1)
    truth = geometry.poses_at(np.linspace(start, end, count + 1))[:, 1:]
    distance = hausdorff_distance(estimate.points, truth)
    true_kappa = geometry.curvature(np.array([geometry.locate(x, y).s for x, y in estimate.points]))
    mae = float(np.mean(np.abs(np.asarray(estimate.kappa) - true_kappa)))
    return distance, mae


def coverage(estimates: Sequence[EstimateSnapshot], geometry: TrackGeometry) -> float:
    """Fraction of the lap lying inside at least one estimate window."""
    bins = max(int(geometry.length / COVERAGE_BIN), 1)
    covered = np.zeros(bins, dtype=bool)
    for estimate in estimates:
        start, end = estimate_window(estimate, geometry)
        first = int(np.floor(start / geometry.length * bins))
        last = int(np.floor(end / geometry.length * bins))
        covered[np.arange(first, last + 1) % bins] = True
    return float(np.mean(covered))


def compute_metrics(log: Sequence[TickRecord], estimates: Sequence[EstimateSnapshot],
                    track: Union[Track, TrackGeometry], config: Optional[SimulationConfig] = None) -> RunMetrics:
    """Estimation and tracking quality of one run."""
    if not log:
        raise ValueError("metrics need a non-empty log")
    config = config or SimulationConfig()
    geometry = _geometry(track)

    errors = [estimate_errors(estimate, geometry) for estimate in estimates if len(estimate.points) >= 2]
    distances = [e[0] for e in errors]
    maes = [e[1] for e in errors]
    eta = np.abs(np.array([record.eta_true for record in log]))

    lap_length = config.laps * geometry.length
    completed = [record for record in log if record.progress >= lap_length]
    lap_time = completed[0].time if completed else None
    diverged = bool(np.any(eta > config.divergence_factor * geometry.track.width))
    covered = coverage(estimates, geometry) if estimates else 0.0
    worst = max(distances) if distances else float("inf")

    metrics = RunMetrics(
        mean_hausdorff=float(np.mean(distances)) if distances else float("inf"),
        worst_hausdorff=worst,
        kappa_mae=float(np.mean(maes)) if maes else float("inf"),
        success=(not diverged and covered >= config.min_coverage and worst <= config.success_hausdorff),
        mean_abs_eta=float(np.mean(eta)),
        max_eta=float(np.max(eta)),
        lap_time=lap_time,
        solver_failures=sum(1 for record in log if record.status == FAILED_STATUS),
        n_estimates=len(errors),
        n_ticks=len(log),
        completed_lap=bool(completed),
        diverged=diverged,
        coverage=covered,
    )
    logger.debug(f"Metrics: HD {metrics.mean_hausdorff:.4f} m, kappa MAE {metrics.kappa_mae:.3f}, "
                 f"max eta {metrics.max_eta:.4f} m, success {metrics.success}")
    return metrics


def summarize(values: Iterable[float]) -> MetricSummary:
    """Mean and population standard deviation, ignoring non-finite entries."""
    array = np.array([v for v in values if np.isfinite(v)], dtype=float)
    if len(array) == 0:
        return MetricSummary(mean=float("nan"), std=float("nan"))
    return MetricSummary(mean=float(np.mean(array)), std=float(np.std(array)))


def aggregate(label: str, track: str, runs: List[RunMetrics]) -> MetricsTable:
    """Collapse the runs of one suite cell into mean ± std columns."""
    if not runs:
        raise ValueError("aggregate needs at least one run")
    worst = [m.worst_hausdorff for m in runs if np.isfinite(m.worst_hausdorff)]
    return MetricsTable(
        label=label, track=track, runs=len(runs),
        hausdorff=summarize(m.mean_hausdorff for m in runs),
        kappa_mae=summarize(m.kappa_mae for m in runs),
        mean_abs_eta=summarize(m.mean_abs_eta for m in runs),
        max_eta=summarize(m.max_eta for m in runs),
        success_rate=100.0 * sum(m.success for m in runs) / len(runs),
        worst_hausdorff=max(worst) if worst else float("nan"),
        overall_max_eta=max(m.max_eta for m in runs),
        solver_failures=sum(m.solver_failures for m in runs),
    )
