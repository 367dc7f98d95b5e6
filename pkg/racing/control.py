"""Receding-horizon contouring controllers over one or several centerline scenarios.

Both controllers share one direct multiple-shooting transcription: the decision
vector holds the input sequence, every scenario's state trajectory and one
nonnegative slack per stage. Each SQP iteration linearizes the shooting gaps
and solves the resulting QP with OSQP; an L1 merit line search globalizes the
step. The cost is quadratic in the decision vector, so the QP Hessian is exact
apart from constraint curvature.
"""

import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
import osqp
from scipy import sparse

from racing.config import ControlConfig, VehicleParams
from racing.curvature_model import curvature_slope, evaluate
from racing.errors import ControlError, FrameError, RacingError, ScenarioInvalidError
from racing.geometry import cartesian_to_frenet
from racing.models import (
    CartesianState,
    CenterlineMap,
    ControlInput,
    CurvatureModel,
    FrenetState,
    ScenarioSet,
    Solution,
    SolveStatus,
)
from racing.sampling import scenario_reference
from racing.vehicle import INPUT_SIZE, STATE_SIZE, CurvatureLookup, rk4_frenet


logger = logging.getLogger(__name__)

S, ETA, PHI, VX, VY, R, DELTA, TAU = range(STATE_SIZE)
MIN_PREDICTION_SPEED = 0.05
ACCEPTED_QP_STATUS = ("solved", "solved inaccurate")
SLACK_TOL = 1e-6
ARMIJO = 1e-4
OSQP_SETTINGS = {
    "verbose": False,
    "eps_abs": 1e-8,
    "eps_rel": 1e-8,
    "eps_prim_inf": 1e-7,
    "eps_dual_inf": 1e-7,
    "max_iter": 20000,
    "polish": True,
}


def stage_cost(prev: Optional[FrenetState], cur: Optional[FrenetState], control: ControlInput,
               config: ControlConfig) -> float:
    """Progress reward, tracking penalty and input effort of one stage.

    Stage 0 has no state pair and only carries the input term.
    """
    effort = config.R[0] * control.delta_rate ** 2 + config.R[1] * control.tau_rate ** 2
    if prev is None or cur is None:
        return effort
    return (-config.q_s * (cur.s - prev.s) + config.q_eta * cur.eta ** 2
            + config.q_phi * cur.phi ** 2 + effort)


def terminal_cost(state: FrenetState, config: ControlConfig) -> float:
    return config.q_vx * state.vx ** 2 + config.q_vy * state.vy ** 2


def trajectory_cost(inputs: np.ndarray, trajectories: np.ndarray, slack: np.ndarray,
                    config: ControlConfig) -> float:
    """Scenario-averaged horizon cost plus the slack penalty."""
    N = len(inputs)
    X = np.asarray(trajectories, dtype=float)
    effort = float(np.sum(np.asarray(inputs) ** 2 * np.asarray(config.R)))
    progress = -config.q_s * (X[:, N - 1, S] - X[:, 0, S])
    tracking = (config.q_eta * np.sum(X[:, 1:N, ETA] ** 2, axis=1)
                + config.q_phi * np.sum(X[:, 1:N, PHI] ** 2, axis=1))
    terminal = config.q_vx * X[:, N, VX] ** 2 + config.q_vy * X[:, N, VY] ** 2
    slack = np.asarray(slack, dtype=float)
    penalty = config.slack_penalty * float(np.sum(slack)) + config.slack_quadratic * float(np.sum(slack ** 2))
    return effort + float(np.mean(progress + tracking + terminal)) + penalty


def scenario_lookup(models: Sequence[CurvatureModel], rows_per_model: int) -> CurvatureLookup:
    """Batched curvature lookup where consecutive row blocks belong to consecutive models."""
    def lookup(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        kappa = np.empty_like(s)
        slope = np.empty_like(s)
        for index, model in enumerate(models):
            block = slice(index * rows_per_model, (index + 1) * rows_per_model)
            kappa[block] = evaluate(model, s[block])
            slope[block] = curvature_slope(model, s[block])
        return kappa, slope
    return lookup


def shift_solution(solution: Solution) -> Solution:
    """Drop the applied first stage and repeat the last one."""
    inputs = np.vstack((solution.inputs[1:], solution.inputs[-1:]))
    trajectories = np.concatenate((solution.trajectories[:, 1:], solution.trajectories[:, -1:]), axis=1)
    return solution.model_copy(update={"inputs": inputs, "trajectories": trajectories})


class _Layout:
    """Index arithmetic of the decision vector [u_0..u_{N-1}, X^1..X^m, slack_1..slack_N]."""

    def __init__(self, N: int, m: int) -> None:
        self.N = N
        self.m = m
        self.n_u = INPUT_SIZE * N
        self.n_x = m * (N + 1) * STATE_SIZE
        self.size = self.n_u + self.n_x + N

    def x(self, scenario: Any, stage: Any, component: Any = 0) -> Any:
        return self.n_u + (scenario * (self.N + 1) + stage) * STATE_SIZE + component

    def slack(self, stage: Any) -> Any:
        return self.n_u + self.n_x + stage - 1

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        U = z[:self.n_u].reshape(self.N, INPUT_SIZE)
        X = z[self.n_u:self.n_u + self.n_x].reshape(self.m, self.N + 1, STATE_SIZE)
        return U, X, z[self.n_u + self.n_x:]

    @staticmethod
    def join(U: np.ndarray, X: np.ndarray, slack: np.ndarray) -> np.ndarray:
        return np.concatenate((U.ravel(), X.ravel(), slack))


class ShootingProblem:
    """Multiple-shooting transcription of the contouring problem over m scenarios."""

    def __init__(self, initial: np.ndarray, models: Sequence[CurvatureModel], s_max: float,
                 config: ControlConfig, params: VehicleParams) -> None:
        self.x0 = np.atleast_2d(np.asarray(initial, dtype=float)).copy()
        self.models = list(models)
        if len(self.models) != len(self.x0):
            raise ValueError("one initial state per scenario model is required")
        self.s_max = float(s_max)
        self.config = config
        self.params = params
        self.N = config.N
        self.m = len(self.models)
        self.layout = _Layout(self.N, self.m)
        self._hessian, self._linear = self._cost_terms()
        self._static = self._static_constraints()

    # prediction model

    def _propagate(self, states: np.ndarray, inputs: np.ndarray, rows_per_model: int,
                   sensitivities: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = self.config
        return rk4_frenet(states, inputs, scenario_lookup(self.models, rows_per_model), self.params,
                          c.dt, c.substeps, c.min_denominator, MIN_PREDICTION_SPEED, sensitivities)

    def rollout(self, U: np.ndarray) -> np.ndarray:
        """Simulate every scenario from its initial state under one input sequence."""
        X = np.empty((self.m, self.N + 1, STATE_SIZE))
        X[:, 0] = self.x0
        for i in range(self.N):
            inputs = np.repeat(U[i][None, :], self.m, axis=0)
            X[:, i + 1] = self._propagate(X[:, i], inputs, 1, False)[0]
        return X

    def shoot(self, U: np.ndarray, X: np.ndarray, sensitivities: bool = True
              ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        states = X[:, :self.N].reshape(self.m * self.N, STATE_SIZE)
        inputs = np.tile(U, (self.m, 1))
        return self._propagate(states, inputs, self.N, sensitivities)

    def gaps(self, z: np.ndarray) -> np.ndarray:
        U, X, _ = self.layout.split(z)
        F = self.shoot(U, X, sensitivities=False)[0].reshape(self.m, self.N, STATE_SIZE)
        return np.concatenate(((X[:, 1:] - F).ravel(), (X[:, 0] - self.x0).ravel()))

    # cost

    def _cost_terms(self) -> Tuple[np.ndarray, np.ndarray]:
        c, lay, N, m = self.config, self.layout, self.N, self.m
        diag = np.zeros(lay.size)
        linear = np.zeros(lay.size)
        diag[:lay.n_u] = 2.0 * np.tile(np.asarray(c.R), N)
        for scenario in range(m):
            stages = np.arange(1, N)
            diag[lay.x(scenario, stages, ETA)] = 2.0 * c.q_eta / m
            diag[lay.x(scenario, stages, PHI)] = 2.0 * c.q_phi / m
            diag[lay.x(scenario, N, VX)] = 2.0 * c.q_vx / m
            diag[lay.x(scenario, N, VY)] = 2.0 * c.q_vy / m
            linear[lay.x(scenario, N - 1, S)] -= c.q_s / m
            linear[lay.x(scenario, 0, S)] += c.q_s / m
        slack = lay.slack(np.arange(1, N + 1))
        diag[slack] = 2.0 * c.slack_quadratic
        linear[slack] = c.slack_penalty
        return diag, linear

    def cost(self, z: np.ndarray) -> float:
        return float(0.5 * np.dot(self._hessian * z, z) + np.dot(self._linear, z))

    def cost_gradient(self, z: np.ndarray) -> np.ndarray:
        return self._hessian * z + self._linear

    # constraints

    def state_boxes(self) -> List[Tuple[int, np.ndarray, np.ndarray]]:
        """(component, lower, upper) per boxed state, widened to contain each initial state."""
        c = self.config
        boxes = []
        for component, (lower, upper) in ((VX, c.vx_bounds), (VY, c.vy_bounds), (R, c.r_bounds),
                                          (DELTA, c.delta_bounds), (TAU, c.tau_bounds)):
            boxes.append((component, np.minimum(lower, self.x0[:, component]),
                          np.maximum(upper, self.x0[:, component])))
        boxes.append((S, np.minimum(0.0, self.x0[:, S]), np.maximum(self.s_max, self.x0[:, S])))
        return boxes

    def _static_constraints(self) -> Tuple[sparse.csc_matrix, np.ndarray, np.ndarray]:
        c, lay, N, m = self.config, self.layout, self.N, self.m
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        lower: List[float] = []
        upper: List[float] = []

        def add(entries: Sequence[Tuple[int, float]], lo: float, hi: float) -> None:
            row = len(lower)
            for col, val in entries:
                rows.append(row)
                cols.append(col)
                vals.append(val)
            lower.append(lo)
            upper.append(hi)

        half = c.width / 2.0
        for scenario in range(m):
            for component, lo, hi in self.state_boxes():
                for i in range(1, N + 1):
                    add([(lay.x(scenario, i, component), 1.0)], float(lo[scenario]), float(hi[scenario]))
            for i in range(1, N + 1):
                col, slack = lay.x(scenario, i, ETA), lay.slack(i)
                add([(col, 1.0), (slack, -1.0)], -np.inf, half)
                add([(col, 1.0), (slack, 1.0)], -half, np.inf)
                if c.heading_bounds is not None:
                    col = lay.x(scenario, i, PHI)
                    add([(col, 1.0), (slack, -1.0)], -np.inf, c.heading_bounds[1])
                    add([(col, 1.0), (slack, 1.0)], c.heading_bounds[0], np.inf)
        for i in range(N):
            add([(i * INPUT_SIZE, 1.0)], *c.delta_rate_bounds)
            add([(i * INPUT_SIZE + 1, 1.0)], *c.tau_rate_bounds)
        for i in range(1, N + 1):
            add([(lay.slack(i), 1.0)], 0.0, np.inf)

        matrix = sparse.csc_matrix((vals, (rows, cols)), shape=(len(lower), lay.size))
        return matrix, np.asarray(lower), np.asarray(upper)

    def _dynamics_constraints(self, z: np.ndarray) -> Tuple[sparse.csc_matrix, np.ndarray, np.ndarray]:
        """Shooting gaps linearized at z and the initial-state equalities."""
        lay, N, m = self.layout, self.N, self.m
        U, X, _ = lay.split(z)
        F, A, B = self.shoot(U, X)
        blocks = np.arange(m * N)
        scenario, stage = blocks // N, blocks % N
        base = STATE_SIZE * blocks
        k = np.arange(STATE_SIZE)
        j = np.arange(INPUT_SIZE)

        eye_rows = (base[:, None] + k[None, :]).ravel()
        eye_cols = lay.x(scenario[:, None], stage[:, None] + 1, k[None, :]).ravel()
        a_rows = np.broadcast_to(base[:, None, None] + k[None, :, None], A.shape).ravel()
        a_cols = np.broadcast_to(lay.x(scenario[:, None, None], stage[:, None, None], k[None, None, :]),
                                 A.shape).ravel()
        b_rows = np.broadcast_to(base[:, None, None] + k[None, :, None], B.shape).ravel()
        b_cols = np.broadcast_to(INPUT_SIZE * stage[:, None, None] + j[None, None, :], B.shape).ravel()

        n_dyn = m * N * STATE_SIZE
        init_rows = n_dyn + np.arange(m * STATE_SIZE)
        init_cols = lay.x(np.repeat(np.arange(m), STATE_SIZE), 0, np.tile(k, m))

        rows = np.concatenate((eye_rows, a_rows, b_rows, init_rows))
        cols = np.concatenate((eye_cols, a_cols, b_cols, init_cols))
        vals = np.concatenate((np.ones(len(eye_rows)), -A.ravel(), -B.ravel(), np.ones(len(init_rows))))
        matrix = sparse.csc_matrix((vals, (rows, cols)), shape=(n_dyn + m * STATE_SIZE, lay.size))

        states = X[:, :N].reshape(m * N, STATE_SIZE)
        inputs = np.tile(U, (m, 1))
        affine = F - np.einsum("nij,nj->ni", A, states) - np.einsum("nij,nj->ni", B, inputs)
        bound = np.concatenate((affine.ravel(), self.x0.ravel()))
        return matrix, bound, bound

    def qp(self, z: np.ndarray) -> Tuple[sparse.csc_matrix, np.ndarray, sparse.csc_matrix, np.ndarray, np.ndarray]:
        dyn, dyn_lo, dyn_hi = self._dynamics_constraints(z)
        static, lo, hi = self._static
        P = sparse.diags(self._hessian, format="csc")
        A = sparse.vstack((dyn, static), format="csc")
        return P, self._linear, A, np.concatenate((dyn_lo, lo)), np.concatenate((dyn_hi, hi))

    # reporting

    def required_slack(self, X: np.ndarray) -> np.ndarray:
        """Smallest per-stage slack that makes the softened rows hold for all scenarios."""
        c = self.config
        need = np.abs(X[:, 1:, ETA]) - c.width / 2.0
        if c.heading_bounds is not None:
            phi = X[:, 1:, PHI]
            need = np.maximum(need, np.maximum(phi - c.heading_bounds[1], c.heading_bounds[0] - phi))
        return np.maximum(np.max(need, axis=0), 0.0)

    def box_violation(self, U: np.ndarray, X: np.ndarray) -> float:
        c = self.config
        worst = 0.0
        for component, lo, hi in self.state_boxes():
            values = X[:, 1:, component]
            worst = max(worst, float(np.max(lo[:, None] - values)), float(np.max(values - hi[:, None])))
        for column, (lo, hi) in enumerate((c.delta_rate_bounds, c.tau_rate_bounds)):
            worst = max(worst, float(np.max(lo - U[:, column])), float(np.max(U[:, column] - hi)))
        return max(worst, 0.0)


class SQPSolver:
    """Sequential quadratic programming over a ShootingProblem."""

    def __init__(self, config: ControlConfig) -> None:
        self.config = config

    def _initial_guess(self, problem: ShootingProblem, warm: Optional[Solution]) -> np.ndarray:
        c, N = self.config, problem.N
        U = np.zeros((N, INPUT_SIZE))
        if warm is not None and warm.inputs.shape == (N, INPUT_SIZE):
            U = shift_solution(warm).inputs.copy()
        U[:, 0] = np.clip(U[:, 0], *c.delta_rate_bounds)
        U[:, 1] = np.clip(U[:, 1], *c.tau_rate_bounds)
        X = problem.rollout(U)
        if not np.all(np.isfinite(X)):
            logger.debug("Warm-start rollout diverged, using a constant-velocity guess")
            X = np.repeat(problem.x0[:, None, :], N + 1, axis=1)
            X[:, :, S] += np.outer(problem.x0[:, VX], c.dt * np.arange(N + 1))
        return _Layout.join(U, X, problem.required_slack(X))

    def solve(self, problem: ShootingProblem, warm: Optional[Solution] = None) -> Solution:
        c = self.config
        lay = problem.layout
        z = self._initial_guess(problem, warm)
        penalty = 10.0
        status = SolveStatus.MAX_ITER
        kkt = float("inf")
        message = ""
        iterations = 0

        for iterations in range(1, c.max_sqp_iters + 1):
            P, q, A, lower, upper = problem.qp(z)
            solver = osqp.OSQP()
            solver.setup(P=P, q=q, A=A, l=lower, u=upper, **OSQP_SETTINGS)
            solver.warm_start(x=z)
            result = solver.solve()
            if result.info.status not in ACCEPTED_QP_STATUS or result.x is None:
                message = f"QP subproblem {result.info.status} at iteration {iterations}"
                logger.warning(message)
                if iterations == 1:
                    status = SolveStatus.FAILED
                break

            direction = np.asarray(result.x) - z
            n_dyn = problem.m * problem.N * STATE_SIZE + problem.m * STATE_SIZE
            duals = np.asarray(result.y)[:n_dyn]
            penalty = max(penalty, 1.1 * float(np.max(np.abs(duals))) if len(duals) else penalty)

            gaps = problem.gaps(z)
            merit = problem.cost(z) + penalty * float(np.sum(np.abs(gaps)))
            slope = float(problem.cost_gradient(z) @ direction) - penalty * float(np.sum(np.abs(gaps)))
            t = 1.0
            while True:
                trial = z + t * direction
                trial_gaps = problem.gaps(trial)
                trial_merit = problem.cost(trial) + penalty * float(np.sum(np.abs(trial_gaps)))
                if np.isfinite(trial_merit) and trial_merit <= merit + ARMIJO * t * min(slope, 0.0):
                    break
                t *= 0.5
                if t < c.min_step:
                    break
            if t < c.min_step:
                message = f"line search stalled at iteration {iterations}"
                logger.debug(message)
                break

            z = trial
            kkt = max(float(np.max(np.abs(t * direction))), float(np.max(np.abs(trial_gaps))))
            if kkt <= c.kkt_tol:
                status = SolveStatus.OPTIMAL
                break

        return self._finish(problem, z, status, kkt, iterations, message)

    def _finish(self, problem: ShootingProblem, z: np.ndarray, status: SolveStatus, kkt: float,
                iterations: int, message: str) -> Solution:
        c = self.config
        U, _, _ = problem.layout.split(z)
        U = U.copy()
        U[:, 0] = np.clip(U[:, 0], *c.delta_rate_bounds)
        U[:, 1] = np.clip(U[:, 1], *c.tau_rate_bounds)
        X = problem.rollout(U)
        if not np.all(np.isfinite(X)):
            status = SolveStatus.FAILED
            message = message or "prediction diverged under the returned inputs"
        slack = problem.required_slack(X) if status != SolveStatus.FAILED else np.zeros(problem.N)
        usage = float(np.max(slack)) if len(slack) else 0.0
        if status != SolveStatus.FAILED and usage > SLACK_TOL:
            status = SolveStatus.INFEASIBLE_RELAXED
        cost = trajectory_cost(U, X, slack, c) if status != SolveStatus.FAILED else float("nan")
        violation = problem.box_violation(U, X) if status != SolveStatus.FAILED else float("nan")
        return Solution(
            inputs=U, trajectories=X, status=status, kkt_residual=kkt,
            max_constraint_violation=violation, slack_usage=usage, cost=cost,
            iterations=iterations, scenarios=list(range(problem.m)), message=message,
        )


def _prepare_initial(state: FrenetState, model: CurvatureModel, config: ControlConfig) -> np.ndarray:
    kappa = float(evaluate(model, state.s))
    if 1.0 - state.eta * kappa <= 0.0:
        raise FrameError(f"initial state outside the Frenet tube: eta={state.eta:.4f}, kappa={kappa:.4f}")
    x0 = state.to_array()
    x0[DELTA] = np.clip(x0[DELTA], *config.delta_bounds)
    x0[TAU] = np.clip(x0[TAU], *config.tau_bounds)
    return x0


def solve_nominal(initial: FrenetState, reference: CenterlineMap, warm: Optional[Solution],
                  config: ControlConfig, params: Optional[VehicleParams] = None) -> Solution:
    """Contouring MPC along a single reference curve."""
    params = params or VehicleParams()
    x0 = _prepare_initial(initial, reference.model, config)
    problem = ShootingProblem(x0[None, :], [reference.model], reference.length, config, params)
    solution = SQPSolver(config).solve(problem, warm)
    logger.debug(f"Nominal solve: {solution.status.value} after {solution.iterations} iteration(s), "
                 f"cost {solution.cost:.4f}")
    return solution


def solve_scenario(initial_cartesian: CartesianState, scenarios: ScenarioSet, warm: Optional[Solution],
                   config: ControlConfig, params: Optional[VehicleParams] = None,
                   drop_invalid: bool = False) -> Solution:
    """One input sequence that keeps every scenario's trajectory on the track.

    With drop_invalid, scenarios whose frame conversion fails are skipped and
    logged instead of raising.
    """
    params = params or VehicleParams()
    initial: List[np.ndarray] = []
    models: List[CurvatureModel] = []
    kept: List[int] = []
    for index in range(scenarios.m):
        reference = scenario_reference(scenarios, index)
        try:
            state = cartesian_to_frenet(initial_cartesian, reference, extrapolate=config.reference_extension)
            x0 = _prepare_initial(state, reference.model, config)
        except RacingError as exc:
            if not drop_invalid:
                raise ScenarioInvalidError(index, str(exc)) from exc
            logger.warning(f"Dropping scenario {index}: {exc}")
            continue
        initial.append(x0)
        models.append(reference.model)
        kept.append(index)
    if not kept:
        raise ControlError("no scenario admits a frame conversion of the car state")

    problem = ShootingProblem(np.vstack(initial), models, scenarios.s_max, config, params)
    solution = SQPSolver(config).solve(problem, warm if _matches(warm, len(kept)) else None)
    logger.debug(f"Scenario solve over {len(kept)} scenario(s): {solution.status.value}, "
                 f"slack {solution.slack_usage:.2e}")
    return solution.model_copy(update={"scenarios": kept})


def _matches(warm: Optional[Solution], m: int) -> bool:
    return warm is not None and warm.trajectories.shape[0] == m


class RacingController:
    """Receding-horizon wrapper holding the warm start and the failure fallback."""

    def __init__(self, config: ControlConfig, params: VehicleParams, drop_invalid: bool = True) -> None:
        self.config = config
        self.params = params
        self.drop_invalid = drop_invalid
        self.previous: Optional[Solution] = None
        self.failures = 0

    def reset(self) -> None:
        self.previous = None
        self.failures = 0

    def plan_nominal(self, initial: FrenetState, reference: CenterlineMap
                     ) -> Tuple[ControlInput, Optional[Solution]]:
        return self._plan(lambda warm: solve_nominal(initial, reference, warm, self.config, self.params))

    def plan_reference(self, car: CartesianState, reference: CenterlineMap
                       ) -> Tuple[ControlInput, Optional[Solution]]:
        """Nominal solve after placing the car on the reference; a failed placement counts as a solver failure."""
        def solve(warm: Optional[Solution]) -> Solution:
            try:
                initial = cartesian_to_frenet(car, reference, extrapolate=self.config.reference_extension)
            except RacingError as exc:
                raise FrameError(f"cannot place the car on the reference: {exc}") from exc
            return solve_nominal(initial, reference, warm, self.config, self.params)
        return self._plan(solve)

    def plan_scenarios(self, initial: CartesianState, scenarios: ScenarioSet
                       ) -> Tuple[ControlInput, Optional[Solution]]:
        return self._plan(lambda warm: solve_scenario(initial, scenarios, warm, self.config, self.params,
                                                      drop_invalid=self.drop_invalid))

    def _plan(self, solve: Callable[[Optional[Solution]], Solution]) -> Tuple[ControlInput, Optional[Solution]]:
        solution: Optional[Solution] = None
        try:
            solution = solve(self.previous)
        except ControlError as exc:
            logger.warning(f"Controller solve raised: {exc}")
        if solution is not None and solution.usable:
            self.failures = 0
            self.previous = solution
            return solution.first_input(), solution

        self.failures += 1
        if self.failures < self.config.max_failures and self.previous is not None:
            self.previous = shift_solution(self.previous)
            logger.info(f"Solver failure {self.failures}, applying the shifted previous plan")
            return self.previous.first_input(), solution
        delta_rate, tau_rate = self.config.fallback_input
        logger.warning(f"Solver failed {self.failures} time(s) in a row, applying fallback input")
        return ControlInput(delta_rate=delta_rate, tau_rate=tau_rate), solution
