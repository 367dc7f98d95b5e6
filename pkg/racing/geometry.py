"""Planar curve primitives: arc-length integration, curvature, Hausdorff and Frenet frames."""

import logging
from typing import Any, Callable, List, Protocol, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from racing.errors import (
    EmptySetError,
    EvaluationError,
    GeometryError,
    InsufficientDataError,
    NonUniqueProjectionError,
    OutOfMapError,
)
from racing.models import CartesianState, ChordRule, FrenetState, PlanarPose, Polyline


logger = logging.getLogger(__name__)

CurvatureFunction = Callable[[Any], Any]
PointSet = Union[Polyline, np.ndarray]

AMBIGUITY_TOL = 1e-6
NEWTON_ITERS = 10


class Reference(Protocol):
    """Anything with extended points (alpha, x, y) on an arc grid."""

    @property
    def mu(self) -> np.ndarray: ...

    @property
    def cum_arc(self) -> np.ndarray: ...


def wrap_angle(angle: Any) -> Any:
    """Wrap angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def angle_difference(a: Any, b: Any) -> Any:
    """a - b through atan2 of the rotation, in (-pi, pi]."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return wrap_angle(np.arctan2(np.sin(d), np.cos(d)))


def integrate_from_midpoints(start: np.ndarray, kappa_mid: np.ndarray, steps: np.ndarray,
                             rule: ChordRule = ChordRule.ARC_CHORD) -> np.ndarray:
    """Integrate (alpha, x, y) from curvature sampled at step midpoints.

    Heading advances by kappa*step and position moves along the mean heading.
    ARC_CHORD moves by the chord of the constant-curvature arc, so constant
    curvature is reproduced exactly; MIDPOINT moves by the step itself.
    Headings are returned unwrapped.
    """
    h = kappa_mid * steps
    alpha = start[0] + np.concatenate(([0.0], np.cumsum(h)))
    beta = alpha[:-1] + 0.5 * h
    chord = steps * np.sinc(h / (2.0 * np.pi)) if rule == ChordRule.ARC_CHORD else steps
    x = start[1] + np.concatenate(([0.0], np.cumsum(chord * np.cos(beta))))
    y = start[2] + np.concatenate(([0.0], np.cumsum(chord * np.sin(beta))))
    return np.column_stack((alpha, x, y))


def _evaluate(kappa: CurvatureFunction, s: np.ndarray) -> np.ndarray:
    values = np.asarray(kappa(s), dtype=float)
    if values.shape != s.shape:
        values = np.array([float(kappa(float(v))) for v in s])
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(float(s[i]), float(values[i]))
    return values


def integrate_curve(start: PlanarPose, kappa: CurvatureFunction, steps: Any,
                    rule: ChordRule = ChordRule.ARC_CHORD) -> np.ndarray:
    """Reconstruct poses (alpha, x, y) from a curvature function and arc increments.

    Returns an (N+1, 3) array whose first row is `start`; angles wrapped.
    """
    steps = np.asarray(steps, dtype=float).ravel()
    if np.any(steps <= 0.0):
        raise GeometryError("arc-length increments must be positive")
    if len(steps) == 0:
        return start.to_array()[None, :]
    knots = np.concatenate(([0.0], np.cumsum(steps)))
    kappa_mid = _evaluate(kappa, knots[:-1] + 0.5 * steps)
    poses = integrate_from_midpoints(start.to_array(), kappa_mid, steps, rule)
    poses[:, 0] = wrap_angle(poses[:, 0])
    return poses


def discrete_curvature(line: Polyline) -> np.ndarray:
    """Curvature per point from finite differences over arc length.

    Interior points use second-order non-uniform differences; the two
    endpoints copy their nearest interior value.
    """
    n = len(line)
    if n < 3:
        raise InsufficientDataError(f"discrete curvature needs at least 3 points, got {n}")
    arc = np.asarray(line.cum_arc)
    gaps = np.diff(arc)
    if np.any(gaps <= 0.0):
        raise GeometryError("discrete curvature requires distinct consecutive points")
    x, y = line.points[:, 0], line.points[:, 1]
    dx = np.gradient(x, arc)
    dy = np.gradient(y, arc)

    h1, h2 = gaps[:-1], gaps[1:]
    denom = h1 * h2 * (h1 + h2)
    ddx = 2.0 * (h1 * x[2:] - (h1 + h2) * x[1:-1] + h2 * x[:-2]) / denom
    ddy = 2.0 * (h1 * y[2:] - (h1 + h2) * y[1:-1] + h2 * y[:-2]) / denom
    dxi, dyi = dx[1:-1], dy[1:-1]
    interior = (dxi * ddy - dyi * ddx) / np.power(dxi ** 2 + dyi ** 2, 1.5)
    return np.concatenate(([interior[0]], interior, [interior[-1]]))


def resample(line: Polyline, spacing: float) -> Polyline:
    """Linearly resample a polyline at uniform arc spacing, keeping both ends."""
    if len(line) == 0:
        raise EmptySetError("cannot resample an empty polyline")
    if len(line) == 1 or line.length == 0.0:
        return Polyline.from_points(line.points[:1])
    count = max(int(np.ceil(line.length / spacing - 1e-9)), 1)
    s = np.linspace(0.0, line.length, count + 1)
    points = np.column_stack((np.interp(s, line.cum_arc, line.points[:, 0]),
                              np.interp(s, line.cum_arc, line.points[:, 1])))
    return Polyline.from_points(points)


def _vertices(points: PointSet) -> np.ndarray:
    array = points.points if isinstance(points, Polyline) else np.asarray(points, dtype=float).reshape(-1, 2)
    if len(array) == 0:
        raise EmptySetError("Hausdorff distance of an empty point set")
    return array


def directed_hausdorff(a: PointSet, b: PointSet) -> float:
    """Largest distance from a vertex of `a` to its nearest vertex of `b`."""
    va, vb = _vertices(a), _vertices(b)
    distances, _ = cKDTree(vb).query(va)
    return float(np.max(distances))


def hausdorff_distance(a: PointSet, b: PointSet) -> float:
    """Symmetric Hausdorff distance between the vertex sets of two polylines."""
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def distances_to_polyline(points: PointSet, line: PointSet) -> np.ndarray:
    """Distance from each point to the nearest segment of a polyline."""
    p, v = _vertices(points), _vertices(line)
    if len(v) == 1:
        return np.hypot(*(p - v[0]).T)
    start, seg = v[:-1], np.diff(v, axis=0)
    length2 = np.maximum(np.einsum("ij,ij->i", seg, seg), 1e-300)
    rel = p[:, None, :] - start[None, :, :]
    t = np.clip(np.einsum("kij,ij->ki", rel, seg) / length2, 0.0, 1.0)
    gap = rel - t[..., None] * seg[None, :, :]
    return np.min(np.hypot(gap[..., 0], gap[..., 1]), axis=1)


class _Frame:
    """Piecewise-linear interpolation of a reference's pose along arc length."""

    def __init__(self, reference: Reference) -> None:
        mu = np.asarray(reference.mu, dtype=float)
        self.s = np.asarray(reference.cum_arc, dtype=float)
        if len(self.s) < 2:
            raise InsufficientDataError("a Frenet reference needs at least 2 points")
        self.alpha = np.unwrap(mu[:, 0])
        self.xy = mu[:, 1:]
        self.length = float(self.s[-1])
        self.kappa_seg = np.diff(self.alpha) / np.diff(self.s)

    def pose(self, s: float) -> Tuple[float, np.ndarray]:
        """Heading and position at arc length s, extending the end tangents outside."""
        if s <= 0.0:
            a = self.alpha[0]
            return a, self.xy[0] + s * np.array([np.cos(a), np.sin(a)])
        if s >= self.length:
            a = self.alpha[-1]
            return a, self.xy[-1] + (s - self.length) * np.array([np.cos(a), np.sin(a)])
        i = min(int(np.searchsorted(self.s, s, side="right")) - 1, len(self.s) - 2)
        w = (s - self.s[i]) / (self.s[i + 1] - self.s[i])
        a = (1.0 - w) * self.alpha[i] + w * self.alpha[i + 1]
        return a, (1.0 - w) * self.xy[i] + w * self.xy[i + 1]

    def curvature(self, s: float) -> float:
        if s <= 0.0 or s >= self.length:
            return 0.0
        i = min(int(np.searchsorted(self.s, s, side="right")) - 1, len(self.s) - 2)
        return float(self.kappa_seg[i])

    def residual(self, s: float, point: np.ndarray) -> float:
        a, p = self.pose(s)
        return float((point - p) @ np.array([np.cos(a), np.sin(a)]))

    def _root(self, lo: float, hi: float, point: np.ndarray) -> float:
        """Safeguarded Newton on the tangential residual within one segment."""
        f_lo = self.residual(lo, point)
        if f_lo == 0.0:
            return lo
        i = min(int(np.searchsorted(self.s, lo, side="right")) - 1, len(self.s) - 2)
        d = (self.xy[i + 1] - self.xy[i]) / (self.s[i + 1] - self.s[i])
        k = self.kappa_seg[i]
        s = 0.5 * (lo + hi)
        for _ in range(4 * NEWTON_ITERS):
            a, p = self.pose(s)
            t = np.array([np.cos(a), np.sin(a)])
            n = np.array([-np.sin(a), np.cos(a)])
            f = float((point - p) @ t)
            if abs(f) < 1e-13:
                break
            if f > 0.0:
                lo = s
            else:
                hi = s
            slope = float(-d @ t + ((point - p) @ n) * k)
            step = s - f / slope if slope < 0.0 else 0.5 * (lo + hi)
            s = step if lo < step < hi else 0.5 * (lo + hi)
            if hi - lo < 1e-14:
                break
        return s

    def project(self, point: np.ndarray, extrapolate: float) -> Tuple[float, float]:
        """Arc length and signed offset of the closest point of the reference."""
        f = np.einsum("ij,ij->i", point - self.xy, np.column_stack((np.cos(self.alpha), np.sin(self.alpha))))
        roots: List[float] = []
        if f[0] < 0.0:
            roots.append(float(f[0]))
        if f[-1] > 0.0:
            roots.append(self.length + float(f[-1]))
        for i in np.flatnonzero((f[:-1] >= 0.0) & (f[1:] < 0.0)):
            roots.append(self._root(float(self.s[i]), float(self.s[i + 1]), point))
        if f[-1] == 0.0:
            roots.append(self.length)

        candidates: List[Tuple[float, float]] = []
        for s in sorted(roots):
            if candidates and abs(s - candidates[-1][1]) < 1e-9:
                continue
            _, p = self.pose(s)
            candidates.append((float(np.hypot(*(point - p))), s))
        if not candidates:
            raise OutOfMapError("no projection of the point onto the reference")
        candidates.sort()
        distance, s = candidates[0]
        if len(candidates) > 1 and candidates[1][0] - distance < AMBIGUITY_TOL:
            raise NonUniqueProjectionError(
                f"ambiguous projection: s={s:.4f} and s={candidates[1][1]:.4f} both at {distance:.6f} m")
        if s < -extrapolate or s > self.length + extrapolate:
            raise OutOfMapError(f"projection s={s:.4f} outside [0, {self.length:.4f}] m")

        a, p = self.pose(s)
        eta = float((point - p) @ np.array([-np.sin(a), np.cos(a)]))
        if abs(eta * self.curvature(s)) >= 1.0:
            raise NonUniqueProjectionError(f"|eta*kappa| >= 1 at s={s:.4f} (eta={eta:.4f})")
        return s, eta


def project_point(reference: Reference, x: float, y: float, extrapolate: float = 0.0) -> Tuple[float, float]:
    """Closest-point projection (s, eta) of a point onto a reference."""
    return _Frame(reference).project(np.array([x, y], dtype=float), extrapolate)


def cartesian_to_frenet(state: CartesianState, reference: Reference, extrapolate: float = 0.0) -> FrenetState:
    """Express a world-frame state relative to a reference curve."""
    frame = _Frame(reference)
    s, eta = frame.project(np.array([state.x_c, state.y_c]), extrapolate)
    alpha, _ = frame.pose(s)
    return FrenetState(
        s=s, eta=eta, phi=float(angle_difference(state.psi, alpha)),
        vx=state.vx, vy=state.vy, r=state.r, delta=state.delta, tau=state.tau,
    )


def frenet_to_cartesian(state: FrenetState, reference: Reference, extrapolate: float = 0.0) -> CartesianState:
    """Inverse of cartesian_to_frenet on the same reference."""
    frame = _Frame(reference)
    if state.s < -extrapolate or state.s > frame.length + extrapolate:
        raise OutOfMapError(f"s={state.s:.4f} outside [0, {frame.length:.4f}] m")
    alpha, p = frame.pose(state.s)
    return CartesianState(
        x_c=float(p[0] - state.eta * np.sin(alpha)),
        y_c=float(p[1] + state.eta * np.cos(alpha)),
        psi=float(wrap_angle(state.phi + alpha)),
        vx=state.vx, vy=state.vy, r=state.r, delta=state.delta, tau=state.tau,
    )
