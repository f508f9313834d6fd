import numpy as np
import pytest
from pydantic import ValidationError

from nplcm.data.schemas import CauseSpec
from nplcm.middleware.error_handler import ConfigurationError
from nplcm.simulate.generator import generate, true_overall_pef, true_stratum_pef
from nplcm.simulate.scenarios import (
    SEVEN_SITE_PEF, get_scenario, scenario_no_covariate_validity, scenario_seven_sites,
    scenario_simulation_I, scenario_simulation_II, simulation_II_grid,
)
from nplcm.simulate.truth import CovariateRule, EffectTerm, LinkTruth, TruthConfig


class TestGrid:
    def test_has_48_points(self):
        grid = simulation_II_grid()
        assert len(grid) == 48
        assert [p['grid_point'] for p in grid] == list(range(1, 49))

    def test_ordering(self):
        grid = simulation_II_grid()
        assert grid[0] == {'grid_point': 1, 'L': 3, 'n_per_side': 250, 'coefficients': 'i',
                           'theta': 0.95, 'psi': [0.5, 0.05]}
        point = grid[12]
        assert (point['L'], point['n_per_side'], point['coefficients']) == (3, 500, 'ii')
        assert point['theta'] == 0.95
        assert grid[47]['L'] == 9 and grid[47]['psi'] == [0.5, 0.15]

    @pytest.mark.parametrize("grid_point", [0, 49])
    def test_out_of_range(self, grid_point):
        with pytest.raises(ConfigurationError):
            scenario_simulation_II(grid_point)

    def test_unknown_scenario(self):
        with pytest.raises(ConfigurationError, match="Unknown scenario"):
            get_scenario('sim3')


class TestScenarios:
    def test_simulation_I_pef_curves(self):
        truth = scenario_simulation_I()
        t = np.linspace(-1.7, 1.7, 25)
        for stratum in (1, 2):
            pef = truth.pef(np.full(t.size, stratum), t)
            assert pef.shape == (25, 9)
            np.testing.assert_allclose(pef.sum(axis=1), 1.0)
        assert truth.metadata == {'gamma_nu1': 0.1, 'beta': 0.1}
        assert truth.rate_matrix('theta')[0, 0] == 0.95
        np.testing.assert_array_equal(truth.rate_matrix('psi')[3], [0.5, 0.05])

    def test_simulation_II_coefficients(self):
        truth = scenario_simulation_II(13)
        assert truth.metadata['beta0'] == [1.0, 0.0, 1.0]
        assert truth.metadata['beta1'] == [-1.5, 1.0, -1.5]
        nine = scenario_simulation_II(33)
        assert nine.metadata['L'] == 9
        assert nine.metadata['beta0'] == [0.0] * 9
        assert nine.metadata['beta1'] == [-1.5, 0.0, -1.5, -1.5, 0.0, -1.5, -1.5, 0.0, -1.5]

    def test_simulation_II_splits_subjects_by_level(self):
        dataset, record = generate(scenario_simulation_II(1))
        assert dataset.n_cases == 250
        assert dataset.n_controls == 250
        assert dataset.x_columns == ('s2',)
        cases = record[record['y'] == 1]
        assert (cases['stratum'] == 2).sum() == 125

    def test_validity_scenario_has_flat_case_weights(self):
        truth = scenario_no_covariate_validity(5)
        weights = truth.case_subclass.probabilities([1, 2], 0.0)
        np.testing.assert_allclose(weights, 0.5)

    def test_seven_sites(self):
        truth = scenario_seven_sites('weak')
        np.testing.assert_allclose(true_stratum_pef(truth)[0], [0.5, 0.2, 0.15, 0.05, 0.05, 0.05])
        np.testing.assert_allclose(np.sum(SEVEN_SITE_PEF, axis=1), 1.0)
        assert truth.rate_matrix('theta')[0, 0] == 0.55
        with pytest.raises(ConfigurationError):
            scenario_seven_sites('medium')

    def test_informative_site_scenario_keeps_the_weak_design(self):
        truth = get_scenario('seven_sites_weak_informative', seed=3)
        weak = scenario_seven_sites('weak', seed=3)
        assert truth.name == 'seven_sites_weak_informative'
        assert truth.metadata['informative_tpr_prior']
        np.testing.assert_array_equal(truth.rate_matrix('theta'), weak.rate_matrix('theta'))
        np.testing.assert_allclose(true_stratum_pef(truth), true_stratum_pef(weak))


class TestTruthConfig:
    def test_table_needs_one_row_per_stratum(self):
        with pytest.raises(ValidationError):
            TruthConfig(
                pathogens=['A', 'B'], causes=CauseSpec.singletons(['A', 'B']),
                covariates=CovariateRule(n_strata=2, cases_per_stratum=5, controls_per_stratum=5),
                etiology=LinkTruth(link='table', table=[[0.5, 0.5]]), theta=0.9, psi=0.1,
            )

    def test_indicator_needs_level(self):
        with pytest.raises(ValidationError):
            EffectTerm(kind='indicator')

    def test_rate_rows_broadcast(self):
        truth = scenario_simulation_II(1)
        np.testing.assert_array_equal(truth.rate_matrix('psi'), np.tile([0.5, 0.05], (3, 1)))


def _two_pathogen_truth(theta, psi, n_cases=20, n_controls=20, causes=None, table=None):
    causes = causes or CauseSpec.singletons(['A', 'B'])
    return TruthConfig(
        pathogens=['A', 'B'], causes=causes,
        covariates=CovariateRule(cases_per_stratum=n_cases, controls_per_stratum=n_controls),
        etiology=LinkTruth(link='table', table=table or [[0.5, 0.5]]),
        theta=theta, psi=psi, seed=3,
    )


class TestGenerate:
    def test_same_seed_same_dataset(self):
        truth = scenario_simulation_II(2)
        first, record_a = generate(truth, seed=9)
        second, record_b = generate(truth, seed=9)
        np.testing.assert_array_equal(first.brs, second.brs)
        np.testing.assert_array_equal(record_a['I'], record_b['I'])

    def test_noiseless_measurements(self):
        dataset, record = generate(_two_pathogen_truth(theta=1.0, psi=0.0))
        case = dataset.y == 1
        expected = np.eye(2)[record.loc[case, 'I'].to_numpy() - 1]
        np.testing.assert_array_equal(dataset.brs[case], expected)
        assert dataset.brs[~case].sum() == 0

    def test_control_positive_rate(self):
        truth = _two_pathogen_truth(theta=0.9, psi=0.3, n_cases=10, n_controls=100_000,
                                    causes=CauseSpec(causes=[['A'], []]), table=[[0.6, 0.4]])
        dataset, _ = generate(truth)
        rates = dataset.brs[dataset.y == 0].mean(axis=0)
        np.testing.assert_allclose(rates, 0.3, atol=0.01)

    def test_record_columns(self):
        truth = scenario_simulation_I()
        dataset, record = generate(truth)
        assert list(record.columns[:7]) == ['subject', 'y', 'stratum', 'day', 't', 'I', 'Z']
        assert record.loc[record['y'] == 0, 'I'].eq(0).all()
        assert record['t'].mean() == pytest.approx(0.0, abs=1e-12)
        assert dataset.x_columns == ('s2', 't')
        assert np.all(dataset.x_design[dataset.y == 0] == 0.0)
        overall = true_overall_pef(record, truth.cause_labels)
        assert overall.sum() == pytest.approx(1.0)

    def test_silver_standard_only_for_cases(self):
        truth = _two_pathogen_truth(theta=0.9, psi=0.1).model_copy(
            update={'ss_pathogens': ['A'], 'theta_ss': 1.0})
        dataset, record = generate(truth)
        case = dataset.y == 1
        assert np.all(np.isnan(dataset.ss[~case]))
        positive = record.loc[case, 'I'].to_numpy() == 1
        np.testing.assert_array_equal(dataset.ss[case, 0], positive.astype(float))
