"""Synthetic forward-looking centerline sensor."""

import logging
import math
from typing import Union

import numpy as np
from scipy.stats import truncnorm

from racing.config import SensorConfig
from racing.geometry import angle_difference
from racing.models import CartesianState, Measurement, Polyline, Track
from racing.tracks import TrackGeometry


logger = logging.getLogger(__name__)

LOOKAHEAD_FACTOR = 1.5


def noise_sigma(distance: np.ndarray, config: SensorConfig) -> np.ndarray:
    """Standard deviation of the lateral noise at a given range."""
    return config.noise_sigma0 + config.noise_sigma_slope * np.asarray(distance, dtype=float)


def sense(car: CartesianState, track: Union[Track, TrackGeometry], config: SensorConfig, tick: int) -> Measurement:
    """Centerline points inside the field of view, ordered along the track ahead of the car.

    Points are spaced `sample_spacing` apart in arc length and shifted along the
    centerline normal by truncated Gaussian noise whose spread grows with range.
    Only the first contiguous visible run is reported. Deterministic per (seed, tick).
    """
    geometry = track if isinstance(track, TrackGeometry) else TrackGeometry(track)
    if not all(math.isfinite(v) for v in (car.x_c, car.y_c, car.psi)):
        raise ValueError("car pose must be finite")
    here = geometry.locate(car.x_c, car.y_c)
    span = LOOKAHEAD_FACTOR * config.max_range + abs(here.eta)
    count = int(span / config.sample_spacing) + 1
    arc = here.s + config.sample_spacing * np.arange(count)
    poses = geometry.poses_at(arc)

    offset = poses[:, 1:] - np.array([car.x_c, car.y_c])
    distance = np.hypot(offset[:, 0], offset[:, 1])
    bearing = angle_difference(np.arctan2(offset[:, 1], offset[:, 0]), car.psi)
    visible = ((np.abs(bearing) <= config.fov_half_angle)
               & (distance >= config.min_range) & (distance <= config.max_range))
    if not np.any(visible):
        logger.debug(f"Tick {tick}: nothing in view")
        return Measurement(points=Polyline.from_points(np.zeros((0, 2))), time_index=tick)

    first = int(np.argmax(visible))
    run = visible[first:]
    last = first + (int(np.argmin(run)) if not np.all(run) else len(run))
    poses, distance = poses[first:last], distance[first:last]

    rng = np.random.default_rng([config.seed, tick])
    sigma = noise_sigma(distance, config)
    bound = config.noise_truncation
    lateral = truncnorm.rvs(-bound, bound, size=len(poses), random_state=rng) * sigma
    normal = np.column_stack((-np.sin(poses[:, 0]), np.cos(poses[:, 0])))
    points = poses[:, 1:] + lateral[:, None] * normal
    return Measurement(points=Polyline.from_points(points), time_index=tick)
