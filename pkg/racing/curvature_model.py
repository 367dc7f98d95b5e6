"""Sigmoid-sum road curvature model."""

import logging
from typing import Any, List, NamedTuple, Tuple

import numpy as np
from scipy.special import expit

from racing.models import ConstraintName, ConstraintViolation, CurvatureModel, SigmoidParams


logger = logging.getLogger(__name__)

SATURATION = 500.0


def unit_sigmoid(z: Any) -> np.ndarray:
    """Logistic function, exactly 0 or 1 beyond +-500."""
    z = np.asarray(z, dtype=float)
    return np.where(z < -SATURATION, 0.0, np.where(z > SATURATION, 1.0, expit(np.clip(z, -SATURATION, SATURATION))))


def evaluate(model: CurvatureModel, s: Any) -> Any:
    """kappa(s) for a scalar or an array of arc lengths."""
    s_arr = np.asarray(s, dtype=float)
    a, b, c = model.arrays()
    if len(a) == 0:
        values = np.full(s_arr.shape, model.kappa0)
    else:
        sig = unit_sigmoid(c * (s_arr[..., None] - b))
        values = model.kappa0 + np.sum(a * sig, axis=-1)
    return float(values) if values.ndim == 0 else values


def curvature_function(model: CurvatureModel) -> Any:
    """Bind a model into a callable kappa(s)."""
    return lambda s: evaluate(model, s)


class CurvatureGradient(NamedTuple):
    """Partial derivatives of kappa at one arc length."""
    d_kappa0: float
    d_a: np.ndarray
    d_b: np.ndarray
    d_c: np.ndarray
    d_s: float


def eval_gradient(model: CurvatureModel, s: float) -> CurvatureGradient:
    """Closed-form partials of kappa with respect to every parameter and to s."""
    a, b, c = model.arrays()
    sig = unit_sigmoid(c * (s - b))
    slope = sig * (1.0 - sig)
    return CurvatureGradient(
        d_kappa0=1.0,
        d_a=sig,
        d_b=-a * c * slope,
        d_c=a * (s - b) * slope,
        d_s=float(np.sum(a * c * slope)),
    )


def curvature_slope(model: CurvatureModel, s: Any) -> Any:
    """d kappa / d s, vectorized."""
    s_arr = np.asarray(s, dtype=float)
    a, b, c = model.arrays()
    if len(a) == 0:
        values = np.zeros(s_arr.shape)
    else:
        sig = unit_sigmoid(c * (s_arr[..., None] - b))
        values = np.sum(a * c * sig * (1.0 - sig), axis=-1)
    return float(values) if values.ndim == 0 else values


def lipschitz_bound(model: CurvatureModel) -> float:
    """Upper bound sum |a_i| c_i / 4 on |d kappa / d s|."""
    a, _, c = model.arrays()
    return float(np.sum(np.abs(a) * c) / 4.0)


def check_constraints(model: CurvatureModel, validity_range: Tuple[float, float],
                      grid_step: float) -> List[ConstraintViolation]:
    """List every violated ordering, range, amplitude and grid-curvature constraint."""
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    lo, hi = model.bounds
    start, end = validity_range
    a, b, _ = model.arrays()
    violations: List[ConstraintViolation] = []

    for i in np.flatnonzero(np.diff(b) <= 0.0):
        violations.append(ConstraintViolation(
            constraint=ConstraintName.ORDERING, index=int(i), location=float(b[i + 1]),
            value=float(b[i + 1] - b[i]), limit=0.0))
    for i in np.flatnonzero(b < start):
        violations.append(ConstraintViolation(
            constraint=ConstraintName.NONNEGATIVE_TRANSITION, index=int(i), location=float(b[i]),
            value=float(b[i]), limit=float(start)))
    for i in np.flatnonzero(b > end):
        violations.append(ConstraintViolation(
            constraint=ConstraintName.TRANSITION_IN_RANGE, index=int(i), location=float(b[i]),
            value=float(b[i]), limit=float(end)))
    for i in np.flatnonzero((a < lo) | (a > hi)):
        violations.append(ConstraintViolation(
            constraint=ConstraintName.AMPLITUDE_BOUNDS, index=int(i), location=float(b[i]),
            value=float(a[i]), limit=float(hi if a[i] > hi else lo)))

    grid = np.append(np.arange(start, end, grid_step), end)
    kappa = np.atleast_1d(evaluate(model, grid))
    margin = lipschitz_bound(model) * grid_step / 2.0
    for mask, limit in ((kappa > hi, hi), (kappa < lo, lo)):
        if np.any(mask):
            excess = np.where(mask, np.abs(kappa - limit), -np.inf)
            j = int(np.argmax(excess))
            violations.append(ConstraintViolation(
                constraint=ConstraintName.CURVATURE_BOUNDS, location=float(grid[j]),
                value=float(kappa[j]), limit=float(limit), margin=margin))
    return violations


def prune(model: CurvatureModel, amplitude_threshold: float) -> CurvatureModel:
    """Drop sigmoids whose amplitude is below the threshold."""
    if amplitude_threshold < 0.0:
        raise ValueError("amplitude_threshold must be nonnegative")
    kept = [p for p in model.sigmoids if abs(p.a) >= amplitude_threshold]
    if len(kept) < model.n_sigmoids:
        logger.debug(f"Pruned {model.n_sigmoids - len(kept)} sigmoid(s)")
    return model.model_copy(update={"sigmoids": kept})


def fold_and_shift(model: CurvatureModel, cut: float) -> Tuple[CurvatureModel, int]:
    """Fold sigmoids centred before `cut` into kappa0 and move the origin to `cut`.

    Returns the re-anchored model and the number of folded sigmoids.
    """
    folded = [p for p in model.sigmoids if p.b < cut]
    kept = [SigmoidParams(a=p.a, b=p.b - cut, c=p.c) for p in model.sigmoids if p.b >= cut]
    kappa0 = model.kappa0 + sum(p.a for p in folded)
    return CurvatureModel(kappa0=kappa0, sigmoids=kept, bounds=model.bounds), len(folded)


def to_vector(model: CurvatureModel) -> np.ndarray:
    """Pack [kappa0, a_1..a_n, b_1..b_n]; steepness stays with the model."""
    a, b, _ = model.arrays()
    return np.concatenate(([model.kappa0], a, b))


def from_vector(vector: np.ndarray, c: Any, bounds: Tuple[float, float]) -> CurvatureModel:
    """Inverse of to_vector for a given steepness (scalar or per sigmoid)."""
    n = (len(vector) - 1) // 2
    steep = np.broadcast_to(np.asarray(c, dtype=float), (n,))
    sigmoids = [SigmoidParams(a=float(vector[1 + i]), b=float(vector[1 + n + i]), c=float(steep[i]))
                for i in range(n)]
    return CurvatureModel(kappa0=float(vector[0]), sigmoids=sigmoids, bounds=bounds)
