"""Augmented-Lagrangian least squares for sigmoid curvature fits."""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from racing.config import SolverConfig
from racing.curvature_model import unit_sigmoid
from racing.errors import EstimationFailedError
from racing.geometry import integrate_from_midpoints
from racing.models import ChordRule, EstimationDiagnostics


logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


def _chord_factor(h: np.ndarray, rule: ChordRule) -> Tuple[np.ndarray, np.ndarray]:
    """Chord length per unit step and its derivative in h."""
    if rule == ChordRule.MIDPOINT:
        return np.ones_like(h), np.zeros_like(h)
    half = 0.5 * h
    value = np.sinc(h / (2.0 * np.pi))
    small = np.abs(h) < 1e-4
    safe = np.where(small, 1.0, half)
    slope = np.where(small, -h / 12.0, (np.cos(half) * half - np.sin(half)) / (2.0 * safe ** 2))
    return value, slope


def constraint_grid(length: float, step: float) -> np.ndarray:
    """Arc lengths at which curvature bounds are imposed, ends included."""
    return np.append(np.arange(0.0, length, step), length)


class CurvatureFitProblem:
    """Map points generated from (alpha0, kappa0, a, b) matched against target points.

    The first target is the pinned anchor; residuals cover the remaining
    targets. Variables are ordered [alpha0, kappa0, a_1..a_n, b_1..b_n].
    """

    def __init__(self, targets: np.ndarray, steps: np.ndarray, steepness: np.ndarray,
                 kappa_bounds: Tuple[float, float], grid_step: float,
                 reg_weight: float = 0.0, smooth_eps: float = 1e-6,
                 ordering_gap: float = 1e-3, kappa_margin: float = 0.01,
                 rule: ChordRule = ChordRule.ARC_CHORD) -> None:
        self.targets = np.asarray(targets, dtype=float)
        self.steps = np.asarray(steps, dtype=float)
        self.c = np.asarray(steepness, dtype=float)
        self.n = len(self.c)
        self.length = float(np.sum(self.steps))
        self.mid = np.concatenate(([0.0], np.cumsum(self.steps)[:-1])) + 0.5 * self.steps
        self.grid = constraint_grid(self.length, grid_step)
        self.kappa_bounds = kappa_bounds
        self.reg_weight = reg_weight
        self.smooth_eps = smooth_eps
        self.ordering_gap = ordering_gap
        self.kappa_margin = kappa_margin
        self.rule = rule

    @property
    def size(self) -> int:
        return 2 + 2 * self.n

    def split(self, theta: np.ndarray) -> Tuple[float, float, np.ndarray, np.ndarray]:
        n = self.n
        return float(theta[0]), float(theta[1]), theta[2:2 + n], theta[2 + n:2 + 2 * n]

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.kappa_bounds
        lower = np.concatenate(([-np.inf, lo], np.full(self.n, lo), np.zeros(self.n)))
        upper = np.concatenate(([np.inf, hi], np.full(self.n, hi), np.full(self.n, self.length)))
        return lower, upper

    def _kappa(self, theta: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Curvature at s and its Jacobian over theta (alpha0 column zero)."""
        _, kappa0, a, b = self.split(theta)
        sig = unit_sigmoid(self.c * (s[:, None] - b))
        kappa = kappa0 + sig @ a
        jac = np.zeros((len(s), self.size))
        jac[:, 1] = 1.0
        jac[:, 2:2 + self.n] = sig
        jac[:, 2 + self.n:] = -a * self.c * sig * (1.0 - sig)
        return kappa, jac

    def poses(self, theta: np.ndarray) -> np.ndarray:
        kappa, _ = self._kappa(theta, self.mid)
        start = np.array([theta[0], self.targets[0, 0], self.targets[0, 1]])
        return integrate_from_midpoints(start, kappa, self.steps, self.rule)

    def data_residuals(self, theta: np.ndarray) -> np.ndarray:
        poses = self.poses(theta)
        diff = poses[1:, 1:] - self.targets[1:]
        return SQRT2 * np.concatenate((diff[:, 0], diff[:, 1]))

    def data_jacobian(self, theta: np.ndarray) -> np.ndarray:
        """Chain rule through the heading recursion and the arc chords."""
        kappa, d_kappa = self._kappa(theta, self.mid)
        h = kappa * self.steps
        d_h = self.steps[:, None] * d_kappa
        d_alpha = np.vstack((np.zeros(self.size), np.cumsum(d_h, axis=0)))
        d_alpha[:, 0] = 1.0
        alpha = theta[0] + np.concatenate(([0.0], np.cumsum(h)))
        beta = alpha[:-1] + 0.5 * h
        d_beta = d_alpha[:-1] + 0.5 * d_h
        factor, factor_slope = _chord_factor(h, self.rule)
        g = self.steps * factor
        d_g = (self.steps * factor_slope)[:, None] * d_h
        cos_b, sin_b = np.cos(beta)[:, None], np.sin(beta)[:, None]
        d_x = np.cumsum(d_g * cos_b - g[:, None] * sin_b * d_beta, axis=0)
        d_y = np.cumsum(d_g * sin_b + g[:, None] * cos_b * d_beta, axis=0)
        return SQRT2 * np.vstack((d_x, d_y))

    def reg_residuals(self, theta: np.ndarray) -> np.ndarray:
        """Smoothed L1 on kappa0 and the amplitudes, scaled by the sigmoid count."""
        if self.reg_weight <= 0.0 or self.n == 0:
            return np.zeros(0)
        levels = theta[1:2 + self.n]
        w = self.reg_weight / self.n
        return np.sqrt(2.0 * w * np.sqrt(levels ** 2 + self.smooth_eps ** 2))

    def reg_jacobian(self, theta: np.ndarray) -> np.ndarray:
        if self.reg_weight <= 0.0 or self.n == 0:
            return np.zeros((0, self.size))
        levels = theta[1:2 + self.n]
        w = self.reg_weight / self.n
        root = np.sqrt(levels ** 2 + self.smooth_eps ** 2)
        r = np.sqrt(2.0 * w * root)
        rows = np.arange(self.n + 1)
        jac = np.zeros((self.n + 1, self.size))
        jac[rows, 1 + rows] = w * levels / (r * root)
        return jac

    def objective(self, theta: np.ndarray) -> float:
        r = np.concatenate((self.data_residuals(theta), self.reg_residuals(theta)))
        return float(0.5 * r @ r)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        r = np.concatenate((self.data_residuals(theta), self.reg_residuals(theta)))
        jac = np.vstack((self.data_jacobian(theta), self.reg_jacobian(theta)))
        return jac.T @ r

    def constraints(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Inequalities g(theta) <= 0: ordering gaps, then tightened curvature bounds."""
        _, _, _, b = self.split(theta)
        n = self.n
        ordering = b[:-1] - b[1:] + self.ordering_gap
        d_ordering = np.zeros((max(n - 1, 0), self.size))
        for i in range(n - 1):
            d_ordering[i, 2 + n + i] = 1.0
            d_ordering[i, 2 + n + i + 1] = -1.0
        lo, hi = self.kappa_bounds
        kappa, d_kappa = self._kappa(theta, self.grid)
        upper = kappa - (hi - self.kappa_margin)
        lower = (lo + self.kappa_margin) - kappa
        g = np.concatenate((ordering, upper, lower))
        jac = np.vstack((d_ordering, d_kappa, -d_kappa))
        return g, jac


class AugmentedLagrangianSolver:
    """PHR augmented Lagrangian with bounded trust-region least-squares inner solves."""

    def __init__(self, config: SolverConfig) -> None:
        self.config = config

    def _kkt(self, problem: CurvatureFitProblem, theta: np.ndarray, multipliers: np.ndarray,
             lower: np.ndarray, upper: np.ndarray) -> float:
        _, g_jac = problem.constraints(theta)
        grad = problem.gradient(theta) + g_jac.T @ multipliers
        projected = theta - np.clip(theta - grad, lower, upper)
        return float(np.max(np.abs(projected))) if len(projected) else 0.0

    def solve(self, problem: CurvatureFitProblem, theta0: np.ndarray,
              kind: str = "initial", time_index: int = 0) -> Tuple[np.ndarray, EstimationDiagnostics]:
        """Minimize the fit objective subject to ordering and curvature bounds."""
        cfg = self.config
        lower, upper = problem.bounds()
        theta = np.clip(np.asarray(theta0, dtype=float), lower, upper)
        g, _ = problem.constraints(theta)
        multipliers = np.zeros(len(g))
        mu = cfg.penalty_init
        previous_violation = np.inf
        best: Optional[np.ndarray] = None
        best_merit = np.inf
        history: List[float] = []
        evaluations = 0
        kkt = np.nan
        violation = np.nan
        converged = False

        def fun(x: np.ndarray) -> np.ndarray:
            g_x, _ = problem.constraints(x)
            shifted = np.maximum(0.0, multipliers + mu * g_x) / np.sqrt(mu)
            return np.concatenate((problem.data_residuals(x), problem.reg_residuals(x), shifted))

        def jac(x: np.ndarray) -> np.ndarray:
            g_x, g_jac = problem.constraints(x)
            active = (multipliers + mu * g_x) > 0.0
            shifted = np.where(active[:, None], np.sqrt(mu) * g_jac, 0.0)
            return np.vstack((problem.data_jacobian(x), problem.reg_jacobian(x), shifted))

        outer = 0
        for outer in range(1, cfg.max_outer_iters + 1):
            result = least_squares(fun, theta, jac=jac, bounds=(lower, upper), method="trf",
                                   x_scale="jac", max_nfev=cfg.max_inner_iters,
                                   ftol=1e-10, xtol=1e-10, gtol=1e-10)
            theta = result.x
            evaluations += int(result.nfev)
            g, _ = problem.constraints(theta)
            violation = float(max(np.max(g, initial=0.0), 0.0))
            merit = problem.objective(theta) + cfg.merit_weight * float(np.sum(np.maximum(g, 0.0)))
            if merit <= best_merit:
                best_merit = merit
                best = theta.copy()
                history.append(merit)

            multipliers = np.maximum(0.0, multipliers + mu * g)
            kkt = self._kkt(problem, theta, multipliers, lower, upper)
            if violation <= cfg.constraint_tol and kkt <= cfg.stationarity_tol:
                converged = True
                best = theta.copy()
                break
            if violation > cfg.violation_decrease * previous_violation:
                mu = min(mu * cfg.penalty_growth, cfg.penalty_max)
            previous_violation = violation

        if best is None:
            raise EstimationFailedError(f"curvature fit produced no finite merit in {outer} outer iterations",
                                        best_iterate=theta, residual=kkt)
        diagnostics = EstimationDiagnostics(
            time_index=time_index, kind=kind, converged=converged, outer_iterations=outer,
            inner_evaluations=evaluations, objective=problem.objective(best),
            kkt_residual=kkt, max_violation=violation, penalty=mu,
            merit_history=history, n_sigmoids=problem.n, n_points=len(problem.targets),
        )
        if not converged:
            raise EstimationFailedError(
                f"curvature fit did not converge after {outer} outer iterations "
                f"(violation {violation:.3g}, kkt {kkt:.3g})",
                best_iterate=best, residual=kkt)
        logger.debug(f"Fit converged in {outer} outer / {evaluations} inner evaluations")
        return best, diagnostics
