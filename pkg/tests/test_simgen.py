"""Tests for samplers, transformation suites, scenarios and presets."""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import kurtosis

from src import simgen
from src.corrkit import CorrelationFamily, CorrelationMatrix, pearson_corr, spearman_corr
from src.errors import InputError, NumericalError, SimulationError
from src.presets import FIGURES, N_GRID, figure_scenarios
from src.pva import LatentFamily
from src.simgen import (
    CONTINUOUS_MAPS,
    ORDINAL_CUTS,
    ReplicateOutcome,
    Scenario,
    ScenarioResult,
    Targets,
    Transform,
    ecdf_scaled,
    ordinal_level,
    proportion_ideal,
    replicate_rng,
    run_scenario,
    sample_latent,
    sample_wishart_corr,
    transform_continuous,
    transform_ordinal,
)

SIGMA = CorrelationMatrix(np.array([
    [1.0, 0.5, 0.2],
    [0.5, 1.0, -0.3],
    [0.2, -0.3, 1.0],
]))


class TestSamplers:

    def test_wishart_unit_diagonal_and_pd(self):
        corr = sample_wishart_corr(10, np.random.default_rng(0))
        np.testing.assert_array_equal(np.diag(corr.values), 1.0)
        np.testing.assert_array_equal(corr.values, corr.values.T)
        assert corr.min_eigenvalue > 0
        assert corr.family is None

    def test_wishart_deterministic(self):
        a = sample_wishart_corr(6, replicate_rng(42, 3, simgen.SIGMA_STREAM))
        b = sample_wishart_corr(6, replicate_rng(42, 3, simgen.SIGMA_STREAM))
        np.testing.assert_array_equal(a.values, b.values)

    def test_wishart_off_diagonal_centered(self):
        rng = np.random.default_rng(1)
        draws = [sample_wishart_corr(2, rng).values[0, 1] for _ in range(10000)]
        assert abs(np.mean(draws)) < 0.03

    def test_wishart_needs_two_variables(self):
        with pytest.raises(InputError):
            sample_wishart_corr(1, np.random.default_rng(0))

    def test_streams_differ(self):
        a = replicate_rng(7, 0, simgen.SIGMA_STREAM).standard_normal(5)
        b = replicate_rng(7, 0, simgen.LATENT_STREAM).standard_normal(5)
        c = replicate_rng(7, 1, simgen.SIGMA_STREAM).standard_normal(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_gaussian_latent_recovers_sigma(self):
        x = sample_latent(20000, SIGMA, LatentFamily.gaussian(), np.random.default_rng(2))
        assert x.shape == (20000, 3)
        assert np.max(np.abs(pearson_corr(x).values - SIGMA.values)) < 0.05

    @pytest.mark.parametrize("family", [LatentFamily.student_t(2.5), LatentFamily.laplace(3.1)])
    def test_heavy_tails(self, family):
        x = sample_latent(20000, SIGMA, family, np.random.default_rng(3))
        assert np.all(kurtosis(x, axis=0) > 0)

    def test_scale_mixture_keeps_rank_dependence(self):
        x = sample_latent(20000, SIGMA, LatentFamily.student_t(2.5), np.random.default_rng(4))
        assert spearman_corr(x).values[0, 1] > 0.3

    def test_latent_deterministic(self):
        a = sample_latent(50, SIGMA, LatentFamily.laplace(3.1), np.random.default_rng(5))
        b = sample_latent(50, SIGMA, LatentFamily.laplace(3.1), np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_latent_needs_pd(self):
        bad = np.full((3, 3), -0.6)
        np.fill_diagonal(bad, 1.0)
        with pytest.raises(NumericalError):
            sample_latent(10, bad, LatentFamily.gaussian(), np.random.default_rng(0))


class TestTransforms:

    def test_ecdf_distinct(self):
        np.testing.assert_allclose(ecdf_scaled([3.0, 1.0, 4.0, 2.0]), [0.6, 0.2, 0.8, 0.4])

    def test_ecdf_all_tied(self):
        np.testing.assert_allclose(ecdf_scaled([5.0, 5.0, 5.0]), [0.5, 0.5, 0.5])

    def test_ecdf_monotone_invariance(self):
        x = np.random.default_rng(6).normal(size=30)
        np.testing.assert_array_equal(ecdf_scaled(np.exp(x)), ecdf_scaled(x))

    def test_capped_square(self):
        np.testing.assert_allclose(CONTINUOUS_MAPS[0](np.array([0.5, 0.7])), [0.25, 0.36])

    def test_capped_sixth(self):
        np.testing.assert_allclose(CONTINUOUS_MAPS[1](np.array([0.5, 0.9])), [0.5 ** 6, 0.6 ** 6])

    def test_caps_tie_the_upper_forty_percent(self):
        u = ecdf_scaled(np.random.default_rng(13).normal(size=1000))
        for fn, cap in zip(CONTINUOUS_MAPS[:2], (0.6 ** 2, 0.6 ** 6)):
            y = fn(u)
            assert np.mean(y == cap) == pytest.approx(0.4)
            assert np.unique(y).size == 601

    def test_pareto_quantile(self):
        assert CONTINUOUS_MAPS[3](0.75) == pytest.approx(2.0)

    def test_exponential_jump(self):
        out = CONTINUOUS_MAPS[4](np.array([0.5, 0.95]))
        np.testing.assert_allclose(out, [np.exp(0.5), 2.0 * np.exp(0.95)])

    def test_maps_are_monotone(self):
        u = np.linspace(0.01, 0.99, 99)
        for fn in CONTINUOUS_MAPS:
            assert np.all(np.diff(fn(u)) >= 0)

    def test_continuous_transform_preserves_ranks(self):
        x = np.random.default_rng(7).normal(size=(200, 6))
        y = transform_continuous(x, [4, 5, 0, 2, 3])
        np.testing.assert_array_equal(y[:, 1], x[:, 1])
        # maps 3 to 5 are strictly increasing
        for col in (0, 2, 3):
            np.testing.assert_array_equal(ecdf_scaled(y[:, col]), ecdf_scaled(x[:, col]))
        assert y[:, 4].max() <= 0.6 ** 2
        assert y[:, 5].max() <= 0.6 ** 6

    def test_maps_cycle_over_all_columns(self):
        x = np.random.default_rng(8).normal(size=(100, 10))
        y = transform_continuous(x, list(range(10)))
        np.testing.assert_allclose(y[:, 5], CONTINUOUS_MAPS[0](ecdf_scaled(x[:, 5])))
        np.testing.assert_allclose(y[:, 9], CONTINUOUS_MAPS[4](ecdf_scaled(x[:, 9])))

    def test_ordinal_levels(self):
        assert ordinal_level(0.19, ORDINAL_CUTS[0]) == 1
        assert ordinal_level(0.21, ORDINAL_CUTS[0]) == 2
        assert ordinal_level(0.65, ORDINAL_CUTS[3]) == 3
        assert ordinal_level(0.05, ORDINAL_CUTS[4]) == 1

    def test_ordinal_transform(self):
        x = np.random.default_rng(9).normal(size=(500, 5))
        y = transform_ordinal(x, [0, 1, 2, 3, 4])
        for j, cuts in enumerate(ORDINAL_CUTS):
            levels = np.unique(y[:, j])
            np.testing.assert_array_equal(levels, np.arange(1, len(cuts) + 2))

    def test_repeated_targets(self):
        with pytest.raises(InputError):
            transform_ordinal(np.zeros((5, 3)), [1, 1])

    def test_target_out_of_range(self):
        with pytest.raises(InputError):
            transform_continuous(np.zeros((5, 3)), [3])


class TestProportionIdeal:

    def test_identical(self):
        assert proportion_ideal([4, 1, 2], [1, 2, 4]) == 1.0

    def test_disjoint(self):
        assert proportion_ideal([0, 1], [2, 3]) == 0.0

    def test_partial(self):
        assert proportion_ideal([1, 2, 3, 4, 5], [1, 2, 3, 8, 9]) == pytest.approx(0.6)

    def test_size_mismatch(self):
        with pytest.raises(InputError):
            proportion_ideal([1, 2], [1])


class TestScenario:

    def test_defaults(self):
        s = Scenario(n=100, seed=1)
        assert s.p == 10 and s.q == 5
        assert s.family == LatentFamily.gaussian()

    def test_latent_canonical_spelling(self):
        assert Scenario(n=100, seed=1, latent="T:2.5").latent == "t:2.5"

    @pytest.mark.parametrize("kwargs", [
        dict(q=10),
        dict(replicates=0),
        dict(latent="t:0.5"),
        dict(methods=(CorrelationFamily.POLYCHORIC,)),
        dict(transform=Transform.CONTINUOUS, q=6),
        dict(methods=()),
        dict(methods=(CorrelationFamily.PEARSON, CorrelationFamily.PEARSON)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            Scenario(n=100, seed=1, **kwargs)

    def test_all_targets_allow_larger_q(self):
        s = Scenario(n=100, seed=1, q=6, transform=Transform.ORDINAL, targets=Targets.ALL)
        assert s.q == 6


class TestRunScenario:

    def _small(self, **kwargs):
        params = dict(n=80, p=5, q=2, replicates=4, seed=11)
        params.update(kwargs)
        return Scenario(**params)

    def test_deterministic(self):
        s = self._small()
        assert run_scenario(s).model_dump() == run_scenario(s).model_dump()

    def test_thread_count_does_not_matter(self):
        s = self._small(transform=Transform.CONTINUOUS)
        assert run_scenario(s, workers=3).model_dump() == run_scenario(s, workers=1).model_dump()

    def test_summaries_in_range(self):
        result = run_scenario(self._small(replicates=6))
        assert result.replicates == 6 and result.excluded == 0
        for summary in result.summaries:
            assert 0.0 <= summary.proportion_ideal_mean <= 1.0
            assert summary.proportion_ideal_stderr >= 0.0
            assert summary.ree_mean > 0.0

    def test_single_replicate_has_zero_stderr(self):
        result = run_scenario(self._small(replicates=1))
        assert all(s.ree_stderr == 0.0 and s.proportion_ideal_stderr == 0.0 for s in result.summaries)

    def test_ordinal_with_polychoric(self):
        s = self._small(
            n=200, transform=Transform.ORDINAL, replicates=2,
            methods=(CorrelationFamily.PEARSON, CorrelationFamily.POLYCHORIC),
        )
        result = run_scenario(s)
        assert [m.method for m in result.summaries] == [CorrelationFamily.PEARSON, CorrelationFamily.POLYCHORIC]

    def test_tidy_rows(self):
        s = self._small(methods=(CorrelationFamily.PEARSON, CorrelationFamily.COPULA), latent="laplace:3.1")
        rows = run_scenario(s).tidy_rows()
        assert len(rows) == 4
        assert {(r["method"], r["metric"]) for r in rows} == {
            ("pearson", "proportion_ideal"), ("pearson", "ree"),
            ("copula", "proportion_ideal"), ("copula", "ree"),
        }
        assert rows[0]["family"] == "laplace" and rows[0]["family_param"] == 3.1

    def test_failed_replicates_are_excluded(self, monkeypatch):
        real = simgen.run_replicate

        def flaky(s, index):
            if index == 0:
                return ReplicateOutcome(index=index, error="degenerate ordinal column")
            return real(s, index)

        monkeypatch.setattr(simgen, "run_replicate", flaky)
        result = run_scenario(self._small(replicates=40))
        assert result.excluded == 1
        assert result.replicates == 39

    def test_exclusion_ceiling(self, monkeypatch):
        monkeypatch.setattr(
            simgen, "run_replicate", lambda s, index: ReplicateOutcome(index=index, error="boom"),
        )
        with pytest.raises(SimulationError) as info:
            run_scenario(self._small(replicates=10))
        assert info.value.excluded == 10 and info.value.total == 10


class TestPresets:

    def test_figure_one_grid(self):
        preset = figure_scenarios("1", replicates=5, seed=7)
        assert preset.metrics == ("proportion_ideal",)
        assert len(preset.scenarios) == 3 * len(N_GRID)
        assert {s.n for s in preset.scenarios} == set(N_GRID)
        assert all(s.q == 5 and s.p == 10 and s.targets is Targets.IDEAL_ONLY for s in preset.scenarios)
        ordinal = [s for s in preset.scenarios if s.transform is Transform.ORDINAL]
        assert all(CorrelationFamily.POLYCHORIC in s.methods for s in ordinal)

    def test_figure_three_families(self):
        preset = figure_scenarios("3", replicates=5, seed=7)
        assert {s.family.tag for s in preset.scenarios} == {"gaussian", "student_t", "laplace"}
        assert {s.family.param for s in preset.scenarios} == {None, 2.5, 3.1}
        assert {s.q for s in preset.scenarios} == {2, 3, 4, 5, 6}
        assert all(s.n == 500 and s.targets is Targets.ALL for s in preset.scenarios)

    @pytest.mark.parametrize("figure_id,latent", [("A1", "t:2.5"), ("a2", "laplace:3.1")])
    def test_appendix(self, figure_id, latent):
        preset = figure_scenarios(figure_id, replicates=5, seed=7)
        assert preset.metrics == ("proportion_ideal", "ree")
        assert {s.latent for s in preset.scenarios} == {latent}

    def test_all_figures_build(self):
        for figure_id in FIGURES:
            assert figure_scenarios(figure_id, replicates=1, seed=0).scenarios

    def test_unknown_figure(self):
        with pytest.raises(InputError):
            figure_scenarios("4")


def test_scenario_result_round_trip():
    s = Scenario(n=60, p=4, q=2, replicates=2, seed=3)
    result = run_scenario(s)
    assert ScenarioResult.model_validate(result.model_dump(mode="json")) == result
