"""Tests for the sigmoid-sum curvature model."""

import numpy as np
import pytest

from racing.curvature_model import (
    check_constraints,
    curvature_slope,
    eval_gradient,
    evaluate,
    fold_and_shift,
    from_vector,
    lipschitz_bound,
    prune,
    to_vector,
    unit_sigmoid,
)
from racing.models import ConstraintName, CurvatureModel, SigmoidParams


def two_step_model() -> CurvatureModel:
    return CurvatureModel(kappa0=0.0, sigmoids=[SigmoidParams(a=1.0, b=0.5), SigmoidParams(a=-1.0, b=2.0)])


class TestEvaluate:
    """Test curvature evaluation."""

    def test_levels_and_midpoint(self) -> None:
        """Test the levels on both sides of a transition and at its center."""
        model = CurvatureModel(kappa0=0.5, sigmoids=[SigmoidParams(a=1.0, b=1.0, c=30.0)])
        assert evaluate(model, 1.0) == pytest.approx(1.0)
        assert evaluate(model, -2.0) == pytest.approx(0.5)
        assert evaluate(model, 4.0) == pytest.approx(1.5)

    def test_scalar_and_array(self) -> None:
        """Test that scalars give floats and arrays keep their shape."""
        model = two_step_model()
        assert isinstance(evaluate(model, 0.3), float)
        assert evaluate(model, np.zeros((2, 3))).shape == (2, 3)

    def test_constant_model(self) -> None:
        """Test a model without sigmoids."""
        assert np.allclose(evaluate(CurvatureModel(kappa0=-0.7), np.linspace(0, 1, 5)), -0.7)

    def test_saturated_sigmoid(self) -> None:
        """Test that large arguments give exact limits."""
        assert unit_sigmoid(1000.0) == 1.0
        assert unit_sigmoid(-1000.0) == 0.0


class TestGradient:
    """Test closed-form derivatives."""

    def test_slope_matches_finite_difference(self) -> None:
        """Test d kappa / d s against a central difference."""
        model = two_step_model()
        h = 1e-6
        numeric = (evaluate(model, 0.6 + h) - evaluate(model, 0.6 - h)) / (2 * h)
        assert eval_gradient(model, 0.6).d_s == pytest.approx(numeric, rel=1e-6)
        assert curvature_slope(model, 0.6) == pytest.approx(numeric, rel=1e-6)

    def test_parameter_partials(self) -> None:
        """Test the partial derivative with respect to one location."""
        model = two_step_model()
        h = 1e-6
        moved = CurvatureModel(sigmoids=[SigmoidParams(a=1.0, b=0.5 + h), SigmoidParams(a=-1.0, b=2.0)])
        numeric = (evaluate(moved, 0.6) - evaluate(model, 0.6)) / h
        assert eval_gradient(model, 0.6).d_b[0] == pytest.approx(numeric, rel=1e-4)

    def test_lipschitz_bound(self) -> None:
        """Test sum |a| c / 4."""
        assert lipschitz_bound(two_step_model()) == pytest.approx(15.0)


class TestConstraints:
    """Test constraint checking."""

    def test_valid_model(self) -> None:
        """Test that a model inside every bound has no violations."""
        assert check_constraints(two_step_model(), (0.0, 3.0), 0.04) == []

    def test_each_violation_is_named(self) -> None:
        """Test ordering, range, amplitude and curvature violations."""
        model = CurvatureModel(kappa0=3.5, sigmoids=[
            SigmoidParams(a=5.0, b=1.0), SigmoidParams(a=-0.5, b=-0.2), SigmoidParams(a=0.1, b=4.0)])
        names = {v.constraint for v in check_constraints(model, (0.0, 3.0), 0.04)}
        assert names == {
            ConstraintName.ORDERING, ConstraintName.NONNEGATIVE_TRANSITION,
            ConstraintName.TRANSITION_IN_RANGE, ConstraintName.AMPLITUDE_BOUNDS,
            ConstraintName.CURVATURE_BOUNDS,
        }

    def test_grid_step_positive(self) -> None:
        """Test that a zero grid step is rejected."""
        with pytest.raises(ValueError):
            check_constraints(two_step_model(), (0.0, 1.0), 0.0)


class TestTransforms:
    """Test pruning, folding and shifting."""

    def test_prune(self) -> None:
        """Test that small amplitudes are dropped."""
        model = CurvatureModel(sigmoids=[SigmoidParams(a=1e-4, b=0.5), SigmoidParams(a=1.0, b=1.0)])
        assert prune(model, 1e-3).n_sigmoids == 1

    def test_fold_and_shift(self) -> None:
        """Test that passed transitions fold into the base level."""
        folded, count = fold_and_shift(two_step_model(), 1.0)
        assert count == 1
        assert folded.kappa0 == pytest.approx(1.0)
        assert folded.sigmoids[0].b == pytest.approx(1.0)
        assert evaluate(folded, 1.0) == pytest.approx(evaluate(two_step_model(), 2.0))

    def test_vector_packing(self) -> None:
        """Test the [kappa0, a, b] layout."""
        vector = to_vector(two_step_model())
        assert np.allclose(vector, [0.0, 1.0, -1.0, 0.5, 2.0])
        assert from_vector(vector, 30.0, (-4.0, 4.0)) == two_step_model()
