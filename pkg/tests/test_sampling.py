"""Tests for scenario sampling and selection."""

import numpy as np
import pytest

from racing.config import SamplingConfig
from racing.geometry import hausdorff_distance
from racing.models import CenterlineMap, ScenarioSet, SelectStrategy
from racing.sampling import (
    reconstruct,
    sample_realizations,
    sample_scenarios,
    scenario_reference,
    select_scenarios,
)


class TestReconstruct:
    """Test reconstruction on the shared anchor and grid."""

    def test_estimate_reproduces_map(self, turn_map: CenterlineMap) -> None:
        """Test that the map's own model rebuilds its points."""
        mu = reconstruct(turn_map.model, turn_map.mu[0], turn_map.cum_arc)
        assert mu.shape == turn_map.mu.shape
        assert np.allclose(mu[:, 1:], turn_map.points, atol=1e-9)


class TestSampleRealizations:
    """Test perturbation and acceptance."""

    def test_zero_sigma_accepts_everything(self, turn_map: CenterlineMap) -> None:
        """Test that unperturbed candidates all fall inside the budget."""
        report = sample_realizations(turn_map, SamplingConfig(sigma_theta=0.0, n_rep=20, m=5))
        assert report.accepted == 20
        assert len(report.records) == 20
        assert max(report.distances) < 1e-9

    def test_budget_is_respected(self, turn_map: CenterlineMap) -> None:
        """Test that every accepted candidate lies within the distance budget."""
        config = SamplingConfig(sigma_theta=0.1, distance_budget=0.1, n_rep=50, m=5, seed=3)
        report = sample_realizations(turn_map, config)
        assert all(d < 0.1 for d in report.distances)
        assert report.accepted == sum(r.accepted for r in report.records)
        for points, distance in zip(report.reconstructions, report.distances):
            assert hausdorff_distance(points, turn_map.points) == pytest.approx(distance)

    def test_seeded_runs_repeat(self, turn_map: CenterlineMap) -> None:
        """Test that the same seed reproduces the attempts and another seed does not."""
        config = SamplingConfig(sigma_theta=0.1, n_rep=20, m=5, seed=7)
        first = sample_realizations(turn_map, config)
        again = sample_realizations(turn_map, config)
        other = sample_realizations(turn_map, config.model_copy(update={"seed": 8}))
        assert [r.distance for r in first.records] == [r.distance for r in again.records]
        assert [r.distance for r in first.records] != [r.distance for r in other.records]


class TestSelectScenarios:
    """Test scenario selection."""

    def test_farthest_from_estimate(self, turn_map: CenterlineMap) -> None:
        """Test that the estimate comes first, followed by the farthest candidates."""
        config = SamplingConfig(sigma_theta=0.02, n_rep=40, m=5, seed=1)
        report = sample_realizations(turn_map, config)
        assert report.accepted >= 5
        scenarios = select_scenarios(report, turn_map, config)
        assert scenarios.m == 5
        assert scenarios.models[0] == turn_map.model
        assert scenarios.distances[0] == 0.0
        assert scenarios.distances[1:] == sorted(report.distances, reverse=True)[:4]
        assert not scenarios.shortfall
        assert scenarios.s_max == pytest.approx(turn_map.length)

    def test_max_diversity(self, turn_map: CenterlineMap) -> None:
        """Test that max-diversity selection is at least as spread as farthest selection."""
        config = SamplingConfig(sigma_theta=0.02, n_rep=12, m=4, seed=1,
                                select_strategy=SelectStrategy.MAX_DIVERSITY)
        report = sample_realizations(turn_map, config)
        diverse = select_scenarios(report, turn_map, config)
        farthest = select_scenarios(report, turn_map, config.model_copy(
            update={"select_strategy": SelectStrategy.FARTHEST}))

        def spread(models: list) -> float:
            curves = [reconstruct(m, turn_map.mu[0], turn_map.cum_arc)[:, 1:] for m in models]
            return min(hausdorff_distance(a, b) for i, a in enumerate(curves) for b in curves[i + 1:])

        assert diverse.m == 4
        assert spread(diverse.models) >= spread(farthest.models) - 1e-9

    def test_shortfall_repeats_estimate(self, turn_map: CenterlineMap) -> None:
        """Test that a zero budget accepts nothing and pads with the estimate."""
        scenarios = sample_scenarios(turn_map, SamplingConfig(distance_budget=0.0, n_rep=10, m=5))
        assert scenarios.shortfall
        assert scenarios.m == 5
        assert all(model == turn_map.model for model in scenarios.models)

    def test_single_scenario(self, turn_map: CenterlineMap) -> None:
        """Test that m = 1 is the estimate alone."""
        scenarios = sample_scenarios(turn_map, SamplingConfig(m=1, n_rep=5))
        assert scenarios.m == 1
        assert not scenarios.shortfall

    def test_scenario_reference(self, turn_map: CenterlineMap) -> None:
        """Test that scenario 0 is the estimated map on the shared grid."""
        scenarios = sample_scenarios(turn_map, SamplingConfig(m=1, n_rep=0))
        reference = scenario_reference(scenarios, 0)
        assert np.allclose(reference.mu, turn_map.mu, atol=1e-9)
        assert reference.s_origin == turn_map.s_origin


class TestScenarioPipeline:
    """Test sampling and selection end to end."""

    STRATEGIES = (
        (SelectStrategy.FARTHEST, 5000),
        (SelectStrategy.MAX_DIVERSITY, 5000),
        (SelectStrategy.MAX_DIVERSITY, 1),
    )

    @staticmethod
    def curves(scenarios: ScenarioSet) -> list:
        return [scenario_reference(scenarios, i).points for i in range(scenarios.m)]

    @staticmethod
    def spread(curves: list) -> float:
        return min(hausdorff_distance(a, b) for i, a in enumerate(curves) for b in curves[i + 1:])

    def config(self, strategy: SelectStrategy, limit: int, seed: int = 4) -> SamplingConfig:
        return SamplingConfig(sigma_theta=0.02, n_rep=12, m=4, seed=seed,
                              select_strategy=strategy, exhaustive_limit=limit)

    def test_seeded_selection_repeats(self, turn_map: CenterlineMap) -> None:
        """Test that every selection path returns the same scenarios for the same seed."""
        for strategy, limit in self.STRATEGIES:
            first = sample_scenarios(turn_map, self.config(strategy, limit))
            again = sample_scenarios(turn_map, self.config(strategy, limit))
            assert first.models == again.models
            assert first.distances == again.distances
            assert all(d < 0.1 for d in first.distances)

    def test_hausdorff_triangle_inequality(self, turn_map: CenterlineMap) -> None:
        """Test the triangle inequality over the estimate and the selected scenarios."""
        for strategy, limit in self.STRATEGIES:
            curves = self.curves(sample_scenarios(turn_map, self.config(strategy, limit)))
            for a in curves:
                for b in curves:
                    for c in curves:
                        assert hausdorff_distance(a, c) <= (
                            hausdorff_distance(a, b) + hausdorff_distance(b, c) + 1e-9)

    def test_exhaustive_spread_dominates_greedy(self, turn_map: CenterlineMap) -> None:
        """Test that exhaustive max-diversity is at least as spread as the greedy search."""
        exhaustive = sample_scenarios(turn_map, self.config(SelectStrategy.MAX_DIVERSITY, 5000))
        greedy = sample_scenarios(turn_map, self.config(SelectStrategy.MAX_DIVERSITY, 1))
        assert self.spread(self.curves(exhaustive)) >= self.spread(self.curves(greedy)) - 1e-6
