from itertools import product

import numpy as np
import pytest
from scipy.special import expit, logit, softmax

from nplcm.data.schemas import CauseSpec, ModelSpec
from nplcm.mcmc.state import init_state
from nplcm.middleware.error_handler import ModelError
from nplcm.models.design import build_context
from nplcm.models.likelihood import (
    bernoulli_product, case_cell_loglik, case_loglik, class_positive_rates, control_loglik,
    etiology_probs, individual_etiology, log_stick_break, nocov_loglik, plcm_loglik,
    positive_rate_curve, stick_break, subclass_weights, total_loglik,
)
from nplcm.models.params import CASE, CONTROL, RateParams, RegressionParams
from tests.conftest import make_dataset, make_params


def _regression(etiology, mu_star=()):
    mu_star = np.asarray(mu_star, dtype=float)
    n = mu_star.size
    return RegressionParams(etiology=np.asarray(etiology, dtype=float), control=np.zeros((n, 0)),
                            case=np.zeros((n, 0)), mu_star=mu_star, tau0=np.ones(n),
                            u=np.tril(np.ones((n, n))))


class TestBuildingBlocks:
    def test_bernoulli_product(self):
        assert bernoulli_product([1, 0], [0.9, 0.2]) == pytest.approx(0.72)
        assert bernoulli_product([0, 0, 0], [0.5, 0.5, 0.5]) == pytest.approx(0.125)

    def test_bernoulli_product_length_mismatch(self):
        with pytest.raises(ModelError):
            bernoulli_product([1, 0], [0.5])

    def test_stick_break(self):
        np.testing.assert_allclose(stick_break([0.5, 0.5]), [0.5, 0.25, 0.25])
        np.testing.assert_allclose(stick_break([1.0, 0.3]), [1.0, 0.0, 0.0])

    def test_log_stick_break_at_zero(self):
        np.testing.assert_allclose(np.exp(log_stick_break(np.zeros(3))),
                                   [0.5, 0.25, 0.125, 0.125])

    def test_stick_break_rejects_fractions_outside_unit_interval(self):
        with pytest.raises(ModelError):
            stick_break([1.2, 0.1])

    def test_single_subclass_weight(self):
        np.testing.assert_array_equal(subclass_weights(np.zeros(0), _regression([[0.0]]), CASE), [1.0])

    def test_zero_intercept_gives_even_split(self):
        weights = subclass_weights(np.zeros(0), _regression([[0.0]], mu_star=[0.0]), CONTROL)
        np.testing.assert_allclose(weights, [0.5, 0.5])

    def test_large_first_intercept_stops_early(self):
        weights = subclass_weights(np.zeros(0), _regression([[0.0]], mu_star=[10.0, 0.0]), CASE)
        assert weights[0] == pytest.approx(expit(10.0))
        assert weights[1] == pytest.approx(expit(10.0) * (1.0 - expit(10.0)))
        assert np.all(weights[1:] < 5e-5)
        assert weights.sum() == pytest.approx(1.0)

    def test_class_positive_rates(self):
        rates = RateParams(theta=np.array([[0.9], [0.8], [0.7]]), psi=np.array([[0.5], [0.05], [0.5]]))
        np.testing.assert_allclose(class_positive_rates((1,), 0, rates), [0.5, 0.8, 0.5])
        np.testing.assert_allclose(class_positive_rates((), 0, rates), [0.5, 0.05, 0.5])
        np.testing.assert_allclose(class_positive_rates((0, 1), 0, rates), [0.9, 0.8, 0.5])

    def test_etiology_probs(self):
        x = np.array([1.0])
        np.testing.assert_allclose(etiology_probs(x, _regression(np.zeros((4, 1)))), 0.25)
        probs = etiology_probs(x, _regression([[np.log(2.0)], [0.0], [0.0]]))
        np.testing.assert_allclose(probs, [0.5, 0.25, 0.25])
        shifted = etiology_probs(x, _regression([[np.log(2.0) + 3.0], [3.0], [3.0]]))
        np.testing.assert_allclose(shifted, probs)


@pytest.fixture
def control_cell_context():
    dataset = make_dataset([[1, 1], [0, 0]], [1, 0])
    spec = ModelSpec(cause_spec=CauseSpec.singletons(['A', 'B']), k_subclasses=2)
    return build_context(dataset, spec)


def test_control_mixture_cell(control_cell_context):
    """nu = (0.6, 0.4), psi_1 = (0.5, 0.5), psi_2 = (0.1, 0.1), m = (0, 0)"""
    params = make_params(theta=np.full((2, 2), 0.9), psi=[[0.5, 0.1], [0.5, 0.1]],
                         etiology=np.zeros((2, 1)), mu_star=[logit(0.6)])
    assert np.exp(control_loglik(control_cell_context, params)) == pytest.approx(0.474, abs=1e-12)


@pytest.fixture
def plain_dataset():
    brs = [[1, 0], [0, 1], [1, 1], [0, 0], [1, 0], [0, 0], [0, 1], [0, 0], [1, 1]]
    y = [1, 1, 1, 1, 1, 0, 0, 0, 0]
    return make_dataset(brs, y)


def test_single_subclass_reduces_to_plcm(plain_dataset):
    causes = CauseSpec(causes=[['A'], ['B'], ['A', 'B'], []])
    context = build_context(plain_dataset, ModelSpec(cause_spec=causes, k_subclasses=1))
    theta = np.array([[0.85], [0.7]])
    psi = np.array([[0.2], [0.1]])
    eta_coef = np.array([[0.3], [-0.2], [0.1], [0.0]])
    params = make_params(theta, psi, eta_coef)

    pi = softmax(eta_coef[:, 0])
    expected = plcm_loglik(plain_dataset.brs, plain_dataset.y, context.causes,
                           pi, theta[:, 0], psi[:, 0])
    assert total_loglik(context, params) == pytest.approx(expected, abs=1e-10)


def test_intercept_only_matches_reference_path(plain_dataset):
    causes = CauseSpec(causes=[['A'], ['B'], []])
    context = build_context(plain_dataset, ModelSpec(cause_spec=causes, k_subclasses=3))
    theta = np.array([[0.9, 0.6, 0.8], [0.7, 0.95, 0.5]])
    psi = np.array([[0.3, 0.05, 0.1], [0.2, 0.15, 0.4]])
    eta_coef = np.array([[0.5], [-0.4], [0.2]])
    mu_star = np.array([0.4, 1.1])
    params = make_params(theta, psi, eta_coef, mu_star=mu_star)

    weights = stick_break(expit(np.cumsum(mu_star)))
    expected = nocov_loglik(plain_dataset.brs, plain_dataset.y, context.causes,
                            softmax(eta_coef[:, 0]), weights, weights, params.rates)
    assert total_loglik(context, params) == pytest.approx(expected, abs=1e-10)


def test_case_loglik_matches_enumeration(toy_context, toy_dataset):
    """J=2, L=2, K=2 with a covariate in both regressions"""
    theta = np.array([[0.9, 0.7], [0.8, 0.6]])
    psi = np.array([[0.2, 0.1], [0.3, 0.05]])
    etiology = np.array([[0.4, -1.0], [-0.3, 0.8]])
    control = np.array([[0.7]])
    case = np.array([[-1.2]])
    mu_star = np.array([0.5])
    params = make_params(theta, psi, etiology, mu_star=mu_star, control=control, case=case)

    expected_cases = 0.0
    expected_controls = 0.0
    for m, y, g in zip(toy_dataset.brs, toy_dataset.y, toy_dataset.w_design[:, 0]):
        if y == 1:
            pi = softmax(etiology @ np.array([1.0, g]))
            first = expit(mu_star[0] + case[0, 0] * g)
            eta = (first, 1.0 - first)
            total = 0.0
            for l, k in product(range(2), range(2)):
                p = psi[:, k].copy()
                p[l] = theta[l, k]
                total += pi[l] * eta[k] * np.prod(p ** m * (1 - p) ** (1 - m))
            expected_cases += np.log(total)
        else:
            first = expit(mu_star[0] + control[0, 0] * g)
            nu = (first, 1.0 - first)
            total = sum(nu[k] * np.prod(psi[:, k] ** m * (1 - psi[:, k]) ** (1 - m)) for k in range(2))
            expected_controls += np.log(total)

    assert case_loglik(toy_context, params) == pytest.approx(expected_cases, abs=1e-10)
    assert control_loglik(toy_context, params) == pytest.approx(expected_controls, abs=1e-10)


def test_pattern_probabilities_sum_to_one():
    """sum over all BrS patterns of the K=2 case likelihood is 1"""
    rates = RateParams(theta=np.array([[0.9, 0.6], [0.8, 0.7], [0.75, 0.85]]),
                       psi=np.array([[0.1, 0.3], [0.2, 0.05], [0.15, 0.4]]))
    causes = ((0,), (1, 2), ())
    pi = np.array([0.2, 0.5, 0.3])
    eta = np.array([0.35, 0.65])
    total = 0.0
    for m in product((0, 1), repeat=3):
        for l, cause in enumerate(causes):
            for k in range(2):
                total += pi[l] * eta[k] * bernoulli_product(m, class_positive_rates(cause, k, rates))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.fixture
def ss_context():
    """Case 1 is SS-positive for A, case 2 SS-negative; controls carry no SS"""
    brs = [[1, 0], [0, 1], [0, 0], [1, 0]]
    y = [1, 1, 0, 0]
    ss = [[1.0], [0.0], [np.nan], [np.nan]]
    dataset = make_dataset(brs, y, ss=ss, ss_index=(0,))
    return build_context(dataset, ModelSpec(cause_spec=CauseSpec.singletons(['A', 'B']), k_subclasses=1))


def _ss_params(theta_ss=0.3):
    return make_params(theta=[[0.9], [0.8]], psi=[[0.1], [0.2]], etiology=np.zeros((2, 1)),
                       theta_ss=[theta_ss])


def test_silver_standard_excludes_other_causes(ss_context):
    params = _ss_params()
    assert case_cell_loglik(ss_context, 0, 1, params) == -np.inf
    assert np.isfinite(case_cell_loglik(ss_context, 0, 0, params))
    ief = individual_etiology(ss_context, params)
    assert ief[0, 1] == 0.0
    assert ief[0, 0] == pytest.approx(1.0)


def test_case_cell_without_ss_is_bernoulli_product(toy_dataset):
    dataset = make_dataset(toy_dataset.brs, toy_dataset.y)
    context = build_context(dataset, ModelSpec(cause_spec=CauseSpec.singletons(['A', 'B'])))
    params = make_params(theta=[[0.9], [0.8]], psi=[[0.1], [0.2]], etiology=np.zeros((2, 1)))
    for i in range(context.cases.n):
        m = context.cases.brs[i]
        expected = np.log(bernoulli_product(m, class_positive_rates((1,), 0, params.rates)))
        assert case_cell_loglik(context, i, 1, params) == pytest.approx(expected, abs=1e-12)


def test_case_index_out_of_range(ss_context):
    with pytest.raises(ModelError):
        case_cell_loglik(ss_context, 5, 0, _ss_params())


def test_individual_etiology_is_bayes_rule():
    dataset = make_dataset([[1, 0], [0, 0]], [1, 0])
    context = build_context(dataset, ModelSpec(cause_spec=CauseSpec.singletons(['A', 'B'])))
    theta = np.array([[0.9], [0.6]])
    psi = np.array([[0.2], [0.1]])
    params = make_params(theta, psi, etiology=[[np.log(0.3)], [np.log(0.7)]])

    a = 0.3 * theta[0, 0] * (1 - psi[1, 0])
    b = 0.7 * psi[0, 0] * (1 - theta[1, 0])
    np.testing.assert_allclose(individual_etiology(context, params)[0], [a / (a + b), b / (a + b)],
                               atol=1e-12)


def test_uniform_prior_and_identical_cells_give_uniform_ief(toy_context):
    params = make_params(theta=np.full((2, 2), 0.5), psi=np.full((2, 2), 0.5),
                         etiology=np.zeros((2, 2)), mu_star=[0.3],
                         control=np.zeros((1, 1)), case=np.zeros((1, 1)))
    np.testing.assert_allclose(individual_etiology(toy_context, params), 0.5, atol=1e-12)


def test_impossible_ss_pattern():
    """A and B both SS-positive, but no cause contains both"""
    dataset = make_dataset([[1, 1], [0, 0]], [1, 0], ss=[[1.0, 1.0], [np.nan, np.nan]],
                           ss_index=(0, 1))
    context = build_context(dataset, ModelSpec(cause_spec=CauseSpec.singletons(['A', 'B'])))
    params = make_params(theta=[[0.9], [0.8]], psi=[[0.1], [0.2]], etiology=np.zeros((2, 1)),
                         theta_ss=[0.3, 0.4])
    with pytest.raises(ModelError, match="data inconsistent with cause spec"):
        individual_etiology(context, params)


class TestPositiveRateCurve:
    causes = ((0,), (1,))

    def _params(self, a, b):
        return make_params(theta=[[0.9], [0.8]], psi=[[0.1], [0.2]], etiology=[[a], [b]])

    def test_certain_cause_gives_tpr(self):
        case_rate, control_rate = positive_rate_curve(
            np.ones((1, 1)), np.zeros((1, 0)), 0, self._params(50.0, -50.0), self.causes)
        assert case_rate[0] == pytest.approx(0.9, abs=1e-12)
        assert control_rate[0] == pytest.approx(0.1, abs=1e-12)

    def test_excluded_cause_gives_fpr(self):
        case_rate, _ = positive_rate_curve(
            np.ones((1, 1)), np.zeros((1, 0)), 0, self._params(-50.0, 50.0), self.causes)
        assert case_rate[0] == pytest.approx(0.1, abs=1e-12)

    def test_non_singleton_cause_rejected(self):
        with pytest.raises(ModelError, match="case_marginal_positive_rate"):
            positive_rate_curve(np.ones((1, 1)), np.zeros((1, 0)), 0,
                                self._params(0.0, 0.0), ((0,), (0, 1)))


def _shifted_loglik(context, params, group, index, delta):
    """Total log-lik after moving one parameter by delta on its unconstrained scale"""
    moved = params.copy()
    if group in ('theta', 'psi'):
        values = getattr(moved.rates, group)
        values[index] = expit(logit(values[index]) + delta)
    elif group == 'mu_star':
        moved.regression.mu_star[index] *= np.exp(delta)
    else:
        getattr(moved.regression, group)[index] += delta
    return total_loglik(context, moved)


def test_total_loglik_finite_differences_are_stable(toy_context, priors):
    params, _ = init_state(toy_context, priors, 17)
    groups = {
        'theta': params.rates.theta, 'psi': params.rates.psi,
        'etiology': params.regression.etiology, 'control': params.regression.control,
        'case': params.regression.case, 'mu_star': params.regression.mu_star,
    }
    for group, values in groups.items():
        for index in np.ndindex(values.shape):
            slopes = [
                (_shifted_loglik(toy_context, params, group, index, h)
                 - _shifted_loglik(toy_context, params, group, index, -h)) / (2.0 * h)
                for h in (1e-4, 1e-5)
            ]
            assert abs(slopes[0] - slopes[1]) <= 1e-3 * max(1.0, abs(slopes[0])), (group, index)
