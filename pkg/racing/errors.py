"""Exception hierarchy for the racing package."""

from typing import Optional

import numpy as np


class RacingError(Exception):
    """Base class for all errors raised by the package."""


class GeometryError(RacingError):
    """Raised by planar curve primitives."""


class EvaluationError(GeometryError):
    """A curvature function returned a non-finite value."""

    def __init__(self, arc_length: float, value: float) -> None:
        super().__init__(f"non-finite curvature {value} at arc length {arc_length:.6f} m")
        self.arc_length = arc_length
        self.value = value


class InsufficientDataError(GeometryError):
    """Too few points for the requested operation."""


class EmptySetError(GeometryError):
    """An operation received an empty point set."""


class NonUniqueProjectionError(GeometryError):
    """A closest-point projection is ambiguous or outside the uniqueness tube."""


class OutOfMapError(GeometryError):
    """An arc length lies outside the reference."""


class EstimationError(RacingError):
    """Raised by centerline estimation."""


class EstimationFailedError(EstimationError):
    """The estimation solver did not converge."""

    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None,
                 residual: float = float("nan")) -> None:
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual = residual


class InfeasibleError(EstimationError):
    """The curvature constraints could not be satisfied."""


class PreconditionError(EstimationError):
    """An estimation operation was called outside its contract."""


class VehicleError(RacingError):
    """Raised by the vehicle model."""


class DomainError(VehicleError):
    """Longitudinal velocity is not positive."""


class SingularFrameError(VehicleError):
    """The Frenet frame is singular at the current state (1 - eta*kappa <= 0)."""


class IntegrationDivergedError(VehicleError):
    """Numerical integration produced a non-finite state."""


class ControlError(RacingError):
    """Raised by the receding-horizon controllers."""


class FrameError(ControlError):
    """The initial state cannot be expressed in the reference frame."""


class ScenarioInvalidError(ControlError):
    """A scenario reference cannot represent the current car state."""

    def __init__(self, scenario: int, reason: str) -> None:
        super().__init__(f"scenario {scenario} invalid: {reason}")
        self.scenario = scenario


class TrackError(RacingError):
    """Raised by track construction."""


class InvalidTrackError(TrackError):
    """The track segments do not form a closed circuit."""


class ConfigError(RacingError):
    """Invalid configuration or command-line usage."""


class ArtifactError(RacingError):
    """An input or output artifact could not be read or written."""
