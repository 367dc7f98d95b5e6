"""Ground-truth circuits built from straights and constant-curvature arcs."""

import logging
import math
from typing import Dict, List, NamedTuple, Tuple

import numpy as np

from racing.errors import InvalidTrackError
from racing.geometry import integrate_curve, wrap_angle
from racing.models import (
    CenterlineMap, CurvatureModel, FrenetCoord, PlanarPose, Polyline, SigmoidParams, Track, TrackSegment
)


logger = logging.getLogger(__name__)

CLOSURE_TOL = 1e-6
HEADING_TOL = 1e-9
SHARP = 3.33
MEDIUM = 2.0


def _arc(curvature: float, angle: float) -> TrackSegment:
    """Arc turning by `angle` radians (sign taken from the curvature)."""
    return TrackSegment(length=abs(angle / curvature), curvature=curvature)


def _straight(length: float) -> TrackSegment:
    return TrackSegment(length=length, curvature=0.0)


def _twice(half: List[TrackSegment]) -> List[TrackSegment]:
    """A half circuit turning by pi, driven twice to close the loop."""
    return half + half


def _builtin_tracks() -> Dict[str, Track]:
    quarter = math.pi / 2.0
    eighth = math.pi / 4.0
    track_a = Track(name="trackA-analogue", segments=_twice([
        _straight(3.0), _arc(SHARP, quarter), _straight(1.2), _arc(MEDIUM, quarter),
    ]))
    track_b = Track(name="trackB-analogue", segments=_twice([
        _straight(1.8), _arc(SHARP, quarter), _straight(0.6), _arc(-MEDIUM, eighth),
        _straight(0.3), _arc(SHARP, quarter), _arc(MEDIUM, eighth), _straight(0.8),
    ]))
    circle = Track(name="circle", segments=[_arc(1.0 / 1.5, 2.0 * math.pi)])
    return {track.name: track for track in (track_a, track_b, circle)}


BUILTIN_TRACKS: Dict[str, Track] = _builtin_tracks()


def get_track(name: str) -> Track:
    """Look up a built-in track by name."""
    try:
        return BUILTIN_TRACKS[name]
    except KeyError:
        raise InvalidTrackError(f"Unknown track '{name}', expected one of {sorted(BUILTIN_TRACKS)}") from None


class TrackLocation(NamedTuple):
    """Closest centerline point: arc length within the lap, signed lateral offset, tangent angle."""
    s: float
    eta: float
    alpha: float

    def frenet(self, psi: float) -> FrenetCoord:
        """Frenet coordinates of a car here with heading psi."""
        return FrenetCoord(s=self.s, eta=self.eta, phi=float(wrap_angle(psi - self.alpha)))


def _advance(pose: np.ndarray, curvature: float, length: float) -> np.ndarray:
    """Exact pose after driving `length` on constant curvature."""
    alpha, x, y = pose
    turn = curvature * length
    chord = length * np.sinc(turn / (2.0 * np.pi))
    mid = alpha + 0.5 * turn
    return np.array([alpha + turn, x + chord * np.cos(mid), y + chord * np.sin(mid)])


class TrackGeometry:
    """Exact pose, curvature and projection queries on a closed track."""

    def __init__(self, track: Track) -> None:
        self.track = track
        lengths = np.array([seg.length for seg in track.segments])
        self.curvatures = np.array([seg.curvature for seg in track.segments])
        self.starts = np.concatenate(([0.0], np.cumsum(lengths)))
        self.length = float(self.starts[-1])
        poses = [track.start_pose.to_array()]
        for seg in track.segments:
            poses.append(_advance(poses[-1], seg.curvature, seg.length))
        self.poses = np.array(poses)
        self._check_closed()

    def _check_closed(self) -> None:
        turn = float(np.sum(self.curvatures * np.diff(self.starts)))
        winding = turn / (2.0 * math.pi)
        if abs(winding - round(winding)) * 2.0 * math.pi > HEADING_TOL or round(winding) == 0:
            raise InvalidTrackError(f"Track '{self.track.name}' heading does not close: total turn {turn:.9f} rad")
        gap = float(np.hypot(*(self.poses[-1, 1:] - self.poses[0, 1:])))
        if gap > CLOSURE_TOL:
            raise InvalidTrackError(f"Track '{self.track.name}' does not close: endpoint gap {gap:.3e} m")

    def _segment(self, s: float) -> Tuple[int, float]:
        s = s % self.length
        index = min(int(np.searchsorted(self.starts, s, side="right")) - 1, len(self.curvatures) - 1)
        return index, s - self.starts[index]

    def curvature(self, s: np.ndarray) -> np.ndarray:
        """Piecewise-constant curvature, periodic in s."""
        wrapped = np.mod(np.asarray(s, dtype=float), self.length)
        index = np.clip(np.searchsorted(self.starts, wrapped, side="right") - 1, 0, len(self.curvatures) - 1)
        return self.curvatures[index]

    def pose(self, s: float) -> PlanarPose:
        index, offset = self._segment(s)
        alpha, x, y = _advance(self.poses[index], self.curvatures[index], offset)
        return PlanarPose(alpha=alpha, x=x, y=y)

    def poses_at(self, s: np.ndarray) -> np.ndarray:
        """(alpha, x, y) rows at each arc length; alpha unwrapped within the lap."""
        return np.array([_advance(self.poses[i], self.curvatures[i], off)
                         for i, off in (self._segment(float(v)) for v in np.asarray(s, dtype=float))])

    def locate(self, x: float, y: float) -> TrackLocation:
        """Closest point of the centerline, searched segment by segment."""
        point = np.array([x, y], dtype=float)
        best = (math.inf, 0.0, 0.0, 0.0)
        for i, kappa in enumerate(self.curvatures):
            alpha0, p0 = self.poses[i, 0], self.poses[i, 1:]
            length = self.starts[i + 1] - self.starts[i]
            tangent = np.array([math.cos(alpha0), math.sin(alpha0)])
            normal = np.array([-tangent[1], tangent[0]])
            if kappa == 0.0:
                t = float(np.clip((point - p0) @ tangent, 0.0, length))
                foot = p0 + t * tangent
                eta = float((point - foot) @ normal)
            else:
                radius = 1.0 / abs(kappa)
                center = p0 + normal / kappa
                rel0, rel = p0 - center, point - center
                sweep = (math.atan2(rel[1], rel[0]) - math.atan2(rel0[1], rel0[0])) * math.copysign(1.0, kappa)
                t = (sweep % (2.0 * math.pi)) * radius
                if t > length:
                    t = length if t - length < 2.0 * math.pi * radius - t else 0.0
                _, fx, fy = _advance(self.poses[i], kappa, t)
                foot = np.array([fx, fy])
                dist_center = float(np.hypot(*rel))
                eta = (radius - dist_center) if kappa > 0.0 else (dist_center - radius)
                if t in (0.0, length):
                    heading = alpha0 + kappa * t
                    eta = float((point - foot) @ np.array([-math.sin(heading), math.cos(heading)]))
            distance = float(np.hypot(*(point - foot)))
            if distance < best[0] - 1e-12:
                best = (distance, self.starts[i] + t, eta, alpha0 + kappa * t)
        _, s, eta, alpha = best
        return TrackLocation(s=float(s % self.length), eta=float(eta), alpha=float(wrap_angle(alpha)))

    def curvature_model(self, s_start: float, s_end: float, steepness: float) -> CurvatureModel:
        """Sigmoid approximation of the true curvature on [s_start, s_end], local arc origin at s_start."""
        kappa0 = float(self.curvature(np.array([s_start]))[0])
        sigmoids: List[SigmoidParams] = []
        lap = math.floor(s_start / self.length) * self.length
        level = kappa0
        for boundary in np.concatenate([lap + self.starts[:-1] + k * self.length for k in range(3)]):
            if s_start < boundary <= s_end:
                nxt = float(self.curvature(np.array([boundary]))[0])
                if nxt != level:
                    sigmoids.append(SigmoidParams(a=nxt - level, b=float(boundary - s_start), c=steepness))
                    level = nxt
        return CurvatureModel(kappa0=kappa0, sigmoids=sigmoids, bounds=(-4.0, 4.0))


def track_centerline(track: Track, spacing: float) -> Tuple[Polyline, np.ndarray]:
    """Closed centerline polyline and the true curvature at each point.

    The arc grid contains every segment boundary, so each step has constant curvature.
    """
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    geometry = TrackGeometry(track)
    count = max(int(math.ceil(geometry.length / spacing)), 3)
    grid = np.union1d(np.linspace(0.0, geometry.length, count + 1), geometry.starts)
    grid = grid[np.concatenate(([True], np.diff(grid) > 1e-12))]
    steps = np.diff(grid)
    mids = grid[:-1] + 0.5 * steps
    kappa_mid = geometry.curvature(mids)
    poses = integrate_curve(track.start_pose, lambda s: geometry.curvature(s), steps)
    gap = float(np.hypot(*(poses[-1, 1:] - poses[0, 1:])))
    if gap > CLOSURE_TOL:
        raise InvalidTrackError(f"Track '{track.name}' centerline does not close: gap {gap:.3e} m")
    kappa = np.append(kappa_mid, kappa_mid[0])
    logger.debug(f"Centerline of '{track.name}': {len(grid)} points over {geometry.length:.3f} m")
    return Polyline(points=poses[:, 1:], cum_arc=grid), kappa


def truth_reference(geometry: TrackGeometry, s_start: float, s_end: float, spacing: float,
                    steepness: float) -> CenterlineMap:
    """Ground-truth window [s_start, s_end] as a map with a local arc origin."""
    if s_end <= s_start:
        raise ValueError("truth window must have positive length")
    count = max(int(math.ceil((s_end - s_start) / spacing)), 2)
    grid = np.linspace(s_start, s_end, count + 1)
    poses = geometry.poses_at(grid)
    poses[:, 0] = wrap_angle(poses[:, 0])
    return CenterlineMap(
        mu=poses, cum_arc=grid - s_start,
        model=geometry.curvature_model(s_start, s_end, steepness), s_origin=s_start,
    )
