"""Single-track vehicle dynamics with Pacejka lateral tires, in Frenet and Cartesian frames."""

import logging
from typing import Callable, NamedTuple, Optional, Tuple, TypeVar, Union

import numpy as np

from racing.config import VehicleParams
from racing.errors import DomainError, IntegrationDivergedError, SingularFrameError
from racing.models import CartesianState, ControlInput, FrenetState


logger = logging.getLogger(__name__)

STATE_SIZE = 8
INPUT_SIZE = 2

# Batched curvature lookup: arc lengths -> (kappa, d kappa / d s)
CurvatureLookup = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]
State = TypeVar("State", FrenetState, CartesianState)


class TireForces(NamedTuple):
    """Lateral tire forces and slip angles."""
    F_yf: float
    F_yr: float
    alpha_f: float
    alpha_r: float


def longitudinal_force(tau: float, vx: float, params: VehicleParams) -> float:
    """Drivetrain force C1 tau + C2 tau^2 + C3 vx + C4 vx^2 + C5 tau vx + C6."""
    p = params
    return p.C1 * tau + p.C2 * tau ** 2 + p.C3 * vx + p.C4 * vx ** 2 + p.C5 * tau * vx + p.C6


def _pacejka(alpha: np.ndarray, B: float, C: float, D: float) -> Tuple[np.ndarray, np.ndarray]:
    """D sin(C atan(B alpha)) and its slope."""
    inner = C * np.arctan(B * alpha)
    return D * np.sin(inner), D * np.cos(inner) * C * B / (1.0 + (B * alpha) ** 2)


class _Body(NamedTuple):
    accel: np.ndarray       # (n, 3): vx_dot, vy_dot, r_dot
    jac: np.ndarray         # (n, 3, 5) over (vx, vy, r, delta, tau)
    F_yf: np.ndarray
    F_yr: np.ndarray
    alpha_f: np.ndarray
    alpha_r: np.ndarray


def _body(vx: np.ndarray, vy: np.ndarray, r: np.ndarray, delta: np.ndarray, tau: np.ndarray,
          params: VehicleParams, min_speed: float = 0.0) -> _Body:
    """Body-frame accelerations shared by both frames, with partials.

    Slip angles follow atan((vy + l_f r)/vx) - delta and atan((vy - l_r r)/vx);
    lateral forces oppose slip.
    """
    p = params
    clamped = vx < min_speed
    v = np.where(clamped, min_speed, vx)
    q_f = (vy + p.l_f * r) / v
    q_r = (vy - p.l_r * r) / v
    alpha_f = np.arctan(q_f) - delta
    alpha_r = np.arctan(q_r)
    P_f, dP_f = _pacejka(alpha_f, p.B_f, p.C_f, p.D_f)
    P_r, dP_r = _pacejka(alpha_r, p.B_r, p.C_r, p.D_r)
    F_yf, F_yr = -P_f, -P_r
    dF_f, dF_r = -dP_f, -dP_r

    wf = 1.0 / (v * (1.0 + q_f ** 2))
    wr = 1.0 / (v * (1.0 + q_r ** 2))
    af_vx = np.where(clamped, 0.0, -q_f * wf)
    ar_vx = np.where(clamped, 0.0, -q_r * wr)
    af_vy, af_r, af_d = wf, p.l_f * wf, -1.0
    ar_vy, ar_r = wr, -p.l_r * wr

    F_x = longitudinal_force(tau, vx, p)
    Fx_tau = p.C1 + 2.0 * p.C2 * tau + p.C5 * vx
    Fx_vx = p.C3 + 2.0 * p.C4 * vx + p.C5 * tau
    sin_d, cos_d = np.sin(delta), np.cos(delta)

    vx_dot = (F_x - F_yf * sin_d + p.m * vy * r) / p.m
    vy_dot = (F_yr + F_yf * cos_d - p.m * vx * r) / p.m
    r_dot = (F_yf * p.l_f * cos_d - F_yr * p.l_r) / p.I_z

    n = np.shape(vx)[0]
    jac = np.zeros((n, 3, 5))
    jac[:, 0, 0] = (Fx_vx - sin_d * dF_f * af_vx) / p.m
    jac[:, 0, 1] = -sin_d * dF_f * af_vy / p.m + r
    jac[:, 0, 2] = -sin_d * dF_f * af_r / p.m + vy
    jac[:, 0, 3] = (-sin_d * dF_f * af_d - F_yf * cos_d) / p.m
    jac[:, 0, 4] = Fx_tau / p.m
    jac[:, 1, 0] = (dF_r * ar_vx + cos_d * dF_f * af_vx) / p.m - r
    jac[:, 1, 1] = (dF_r * ar_vy + cos_d * dF_f * af_vy) / p.m
    jac[:, 1, 2] = (dF_r * ar_r + cos_d * dF_f * af_r) / p.m - vx
    jac[:, 1, 3] = (cos_d * dF_f * af_d - F_yf * sin_d) / p.m
    jac[:, 2, 0] = (p.l_f * cos_d * dF_f * af_vx - p.l_r * dF_r * ar_vx) / p.I_z
    jac[:, 2, 1] = (p.l_f * cos_d * dF_f * af_vy - p.l_r * dF_r * ar_vy) / p.I_z
    jac[:, 2, 2] = (p.l_f * cos_d * dF_f * af_r - p.l_r * dF_r * ar_r) / p.I_z
    jac[:, 2, 3] = (p.l_f * cos_d * dF_f * af_d - F_yf * p.l_f * sin_d) / p.I_z
    return _Body(np.column_stack((vx_dot, vy_dot, r_dot)), jac, F_yf, F_yr, alpha_f, alpha_r)


def frenet_dynamics(x: np.ndarray, u: np.ndarray, curvature: CurvatureLookup, params: VehicleParams,
                    min_denominator: float = 0.0, min_speed: float = 0.0
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched Frenet-frame derivative and its state/input Jacobians.

    x is (n, 8), u is (n, 2). Returns f (n, 8), A (n, 8, 8), B (n, 8, 2).
    """
    s, eta, phi, vx, vy, r, delta, tau = x.T
    kappa, dkappa = curvature(s)
    denom = 1.0 - eta * kappa
    clamped = denom < min_denominator
    denom = np.where(clamped, min_denominator, denom)
    cos_p, sin_p = np.cos(phi), np.sin(phi)
    num = vx * cos_p - vy * sin_p
    s_dot = num / denom

    body = _body(vx, vy, r, delta, tau, params, min_speed)
    n = len(s)
    f = np.column_stack((s_dot, vx * sin_p + vy * cos_p, r - kappa * s_dot,
                         body.accel, u[:, 0], u[:, 1]))

    A = np.zeros((n, STATE_SIZE, STATE_SIZE))
    ds_s = np.where(clamped, 0.0, num * eta * dkappa / denom ** 2)
    ds_eta = np.where(clamped, 0.0, num * kappa / denom ** 2)
    ds_phi = (-vx * sin_p - vy * cos_p) / denom
    ds_vx = cos_p / denom
    ds_vy = -sin_p / denom
    A[:, 0, 0], A[:, 0, 1], A[:, 0, 2], A[:, 0, 3], A[:, 0, 4] = ds_s, ds_eta, ds_phi, ds_vx, ds_vy
    A[:, 1, 2] = num
    A[:, 1, 3] = sin_p
    A[:, 1, 4] = cos_p
    A[:, 2, 0] = -dkappa * s_dot - kappa * ds_s
    A[:, 2, 1] = -kappa * ds_eta
    A[:, 2, 2] = -kappa * ds_phi
    A[:, 2, 3] = -kappa * ds_vx
    A[:, 2, 4] = -kappa * ds_vy
    A[:, 2, 5] = 1.0
    A[:, 3:6, 3:8] = body.jac
    B = np.zeros((n, STATE_SIZE, INPUT_SIZE))
    B[:, 6, 0] = 1.0
    B[:, 7, 1] = 1.0
    return f, A, B


def cartesian_dynamics(x: np.ndarray, u: np.ndarray, params: VehicleParams) -> np.ndarray:
    """Batched world-frame derivative; body rows come from the same routine as the Frenet model."""
    _, _, psi, vx, vy, r, delta, tau = x.T
    body = _body(vx, vy, r, delta, tau, params)
    cos_p, sin_p = np.cos(psi), np.sin(psi)
    return np.column_stack((vx * cos_p - vy * sin_p, vx * sin_p + vy * cos_p, r,
                            body.accel, u[:, 0], u[:, 1]))


def _check_speed(vx: float) -> None:
    if not vx > 0.0:
        raise DomainError(f"longitudinal velocity must be positive, got {vx}")


def tire_forces(state: Union[FrenetState, CartesianState], params: VehicleParams) -> TireForces:
    """Front and rear lateral forces with their slip angles."""
    _check_speed(state.vx)
    body = _body(np.array([state.vx]), np.array([state.vy]), np.array([state.r]),
                 np.array([state.delta]), np.array([state.tau]), params)
    return TireForces(float(body.F_yf[0]), float(body.F_yr[0]), float(body.alpha_f[0]), float(body.alpha_r[0]))


def scalar_curvature(kappa: Callable[[float], float], slope: Optional[Callable[[float], float]] = None
                     ) -> CurvatureLookup:
    """Adapt a scalar curvature function to the batched lookup."""
    def lookup(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        values = np.array([float(kappa(float(v))) for v in s])
        slopes = np.array([float(slope(float(v))) for v in s]) if slope else np.zeros(len(s))
        return values, slopes
    return lookup


def frenet_derivative(state: FrenetState, control: ControlInput, kappa: Callable[[float], float],
                      params: VehicleParams) -> np.ndarray:
    """Time derivative of the Frenet state."""
    _check_speed(state.vx)
    k = float(kappa(state.s))
    if 1.0 - state.eta * k <= 0.0:
        raise SingularFrameError(f"1 - eta*kappa = {1.0 - state.eta * k:.4f} at s={state.s:.4f}")
    f, _, _ = frenet_dynamics(state.to_array()[None, :], control.to_array()[None, :],
                              scalar_curvature(kappa), params)
    return f[0]


def frenet_jacobians(state: FrenetState, control: ControlInput, kappa: Callable[[float], float],
                     slope: Callable[[float], float], params: VehicleParams) -> Tuple[np.ndarray, np.ndarray]:
    """State and input Jacobians of frenet_derivative."""
    _, A, B = frenet_dynamics(state.to_array()[None, :], control.to_array()[None, :],
                              scalar_curvature(kappa, slope), params)
    return A[0], B[0]


def cartesian_derivative(state: CartesianState, control: ControlInput, params: VehicleParams) -> np.ndarray:
    """Time derivative of the world-frame state."""
    _check_speed(state.vx)
    return cartesian_dynamics(state.to_array()[None, :], control.to_array()[None, :], params)[0]


def rk4_frenet(x: np.ndarray, u: np.ndarray, curvature: CurvatureLookup, params: VehicleParams,
               dt: float, substeps: int = 1, min_denominator: float = 0.0, min_speed: float = 0.0,
               sensitivities: bool = True) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched RK4 step with zero-order-hold input and chained sensitivities.

    With sensitivities=False the returned Jacobians are identity and zero.
    """
    h = dt / substeps
    n = len(x)
    eye = np.broadcast_to(np.eye(STATE_SIZE), (n, STATE_SIZE, STATE_SIZE))
    Ax = eye.copy()
    Bx = np.zeros((n, STATE_SIZE, INPUT_SIZE))

    def dyn(state: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return frenet_dynamics(state, u, curvature, params, min_denominator, min_speed)

    if not sensitivities:
        x = _rk4(x, lambda state: dyn(state)[0], dt, substeps)
        return x, Ax, Bx

    for _ in range(substeps):
        k1, A1, B1 = dyn(x)
        k2, A2, B2 = dyn(x + 0.5 * h * k1)
        d1x, d1u = A1, B1
        d2x = A2 @ (eye + 0.5 * h * d1x)
        d2u = A2 @ (0.5 * h * d1u) + B2
        k3, A3, B3 = dyn(x + 0.5 * h * k2)
        d3x = A3 @ (eye + 0.5 * h * d2x)
        d3u = A3 @ (0.5 * h * d2u) + B3
        k4, A4, B4 = dyn(x + h * k3)
        d4x = A4 @ (eye + h * d3x)
        d4u = A4 @ (h * d3u) + B4
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step_x = eye + h / 6.0 * (d1x + 2.0 * d2x + 2.0 * d3x + d4x)
        step_u = h / 6.0 * (d1u + 2.0 * d2u + 2.0 * d3u + d4u)
        Bx = step_x @ Bx + step_u
        Ax = step_x @ Ax
    return x, Ax, Bx


def _rk4(x: np.ndarray, rhs: Callable[[np.ndarray], np.ndarray], dt: float, substeps: int) -> np.ndarray:
    h = dt / substeps
    for _ in range(substeps):
        k1 = rhs(x)
        k2 = rhs(x + 0.5 * h * k1)
        k3 = rhs(x + 0.5 * h * k2)
        k4 = rhs(x + h * k3)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def step(state: State, control: ControlInput, kappa: Optional[Callable[[float], float]],
         params: VehicleParams, dt: float, substeps: int = 1) -> State:
    """Advance a Frenet or Cartesian state by dt with RK4 and constant input."""
    if dt <= 0.0 or substeps < 1:
        raise ValueError("dt must be positive and substeps at least 1")
    _check_speed(state.vx)
    u = control.to_array()[None, :]
    if isinstance(state, FrenetState):
        if kappa is None:
            raise ValueError("a Frenet step needs a curvature function")
        lookup = scalar_curvature(kappa)

        def rhs(x: np.ndarray) -> np.ndarray:
            kx, _ = lookup(x[:, 0])
            if np.any(1.0 - x[:, 1] * kx <= 0.0):
                raise SingularFrameError(f"1 - eta*kappa <= 0 at s={float(x[0, 0]):.4f}")
            if np.any(x[:, 3] <= 0.0):
                raise DomainError(f"longitudinal velocity dropped to {float(x[0, 3]):.4f}")
            return frenet_dynamics(x, u, lookup, params)[0]
    else:
        def rhs(x: np.ndarray) -> np.ndarray:
            if np.any(x[:, 3] <= 0.0):
                raise DomainError(f"longitudinal velocity dropped to {float(x[0, 3]):.4f}")
            return cartesian_dynamics(x, u, params)

    nxt = _rk4(state.to_array()[None, :], rhs, dt, substeps)[0]
    if not np.all(np.isfinite(nxt)):
        raise IntegrationDivergedError(f"non-finite state after step: {nxt}")
    return type(state).from_array(nxt)
