"""Centerline realizations from perturbed curvature parameters under a Hausdorff budget."""

import itertools
import logging
import math
from typing import List, Sequence

import numpy as np

from racing.config import SamplingConfig
from racing.curvature_model import check_constraints, curvature_function, from_vector, to_vector
from racing.geometry import hausdorff_distance, integrate_curve
from racing.models import (
    CandidateRecord,
    CenterlineMap,
    CurvatureModel,
    PlanarPose,
    SamplingReport,
    ScenarioSet,
    SelectStrategy,
)


logger = logging.getLogger(__name__)


def reconstruct(model: CurvatureModel, anchor_pose: np.ndarray, cum_arc: np.ndarray) -> np.ndarray:
    """Map points of a model integrated from a shared anchor over a shared grid."""
    anchor = PlanarPose(alpha=float(anchor_pose[0]), x=float(anchor_pose[1]), y=float(anchor_pose[2]))
    return integrate_curve(anchor, curvature_function(model), np.diff(cum_arc))


def _grid_step(cum_arc: np.ndarray) -> float:
    return float(np.median(np.diff(cum_arc))) if len(cum_arc) > 1 else 1.0


def sample_realizations(centerline: CenterlineMap, config: SamplingConfig) -> SamplingReport:
    """Perturb the map's parameters n_rep times and keep candidates inside the budget."""
    model = centerline.model
    base = to_vector(model)
    _, _, steepness = model.arrays()
    n = model.n_sigmoids
    scales = config.sigma_theta * np.concatenate(([1.0], np.ones(n), np.full(n, config.b_scale)))
    anchor = centerline.mu[0]
    validity = (0.0, centerline.length)
    step = _grid_step(centerline.cum_arc)
    report = SamplingReport()

    for attempt in range(config.n_rep):
        rng = np.random.default_rng([config.seed, attempt])
        theta = base + scales * rng.standard_normal(len(base))
        candidate = from_vector(theta, steepness, model.bounds)
        constraints_ok = not check_constraints(candidate, validity, step)
        points = reconstruct(candidate, anchor, centerline.cum_arc)[:, 1:]
        distance = hausdorff_distance(points, centerline.points)
        accepted = constraints_ok and distance < config.distance_budget
        report.records.append(CandidateRecord(attempt=attempt, accepted=accepted,
                                              distance=distance, constraints_ok=constraints_ok))
        if accepted:
            report.candidates.append(candidate)
            report.distances.append(distance)
            report.reconstructions.append(points)

    logger.debug(f"Sampling accepted {report.accepted}/{config.n_rep} candidates")
    return report


def _min_pairwise(indices: Sequence[int], pairwise: np.ndarray, to_estimate: np.ndarray) -> float:
    values = [float(to_estimate[i]) for i in indices]
    values.extend(float(pairwise[i, j]) for i, j in itertools.combinations(indices, 2))
    return min(values) if values else 0.0


def _max_diversity(report: SamplingReport, count: int, farthest: List[int], limit: int) -> List[int]:
    k = report.accepted
    pairwise = np.zeros((k, k))
    for i, j in itertools.combinations(range(k), 2):
        pairwise[i, j] = pairwise[j, i] = hausdorff_distance(report.reconstructions[i], report.reconstructions[j])
    to_estimate = np.asarray(report.distances)

    if math.comb(k, count) <= limit:
        best = max(itertools.combinations(range(k), count),
                   key=lambda subset: _min_pairwise(subset, pairwise, to_estimate))
        chosen = list(best)
    else:
        chosen = [int(np.argmax(to_estimate))]
        while len(chosen) < count:
            rest = [i for i in range(k) if i not in chosen]
            chosen.append(max(rest, key=lambda i: _min_pairwise([*chosen, i], pairwise, to_estimate)))
    if _min_pairwise(farthest, pairwise, to_estimate) > _min_pairwise(chosen, pairwise, to_estimate):
        return farthest
    return chosen


def select_scenarios(report: SamplingReport, centerline: CenterlineMap, config: SamplingConfig) -> ScenarioSet:
    """Pick m - 1 accepted candidates to accompany the estimate."""
    count = config.m - 1
    order = sorted(range(report.accepted), key=lambda i: -report.distances[i])
    chosen = order[:count]
    if (config.select_strategy == SelectStrategy.MAX_DIVERSITY
            and count > 1 and report.accepted > count):
        chosen = _max_diversity(report, count, chosen, config.exhaustive_limit)

    models = [centerline.model] + [report.candidates[i] for i in chosen]
    distances = [0.0] + [report.distances[i] for i in chosen]
    shortfall = len(chosen) < count
    if shortfall:
        missing = count - len(chosen)
        logger.warning(f"Only {len(chosen)} of {count} scenarios available, repeating the estimate {missing} time(s)")
        models.extend([centerline.model] * missing)
        distances.extend([0.0] * missing)

    return ScenarioSet(
        models=models, anchor=centerline.anchor, cum_arc=centerline.cum_arc,
        s_max=centerline.length, s_origin=centerline.s_origin,
        shortfall=shortfall, distances=distances,
    )


def sample_scenarios(centerline: CenterlineMap, config: SamplingConfig) -> ScenarioSet:
    return select_scenarios(sample_realizations(centerline, config), centerline, config)


def scenario_reference(scenarios: ScenarioSet, index: int) -> CenterlineMap:
    """Reference curve of one scenario on the shared anchor and grid."""
    model = scenarios.models[index]
    mu = reconstruct(model, scenarios.anchor.to_array(), scenarios.cum_arc)
    return CenterlineMap(mu=mu, cum_arc=scenarios.cum_arc, model=model, s_origin=scenarios.s_origin)
