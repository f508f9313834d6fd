import dataclasses

import numpy as np
import pandas as pd
import pytest

from nplcm.evaluation.summaries import (
    etiology_log_odds_contrast, fitted_positive_rate_curves, ief_summary, overall_pef,
    overall_pef_draws, pef_curve, posterior_band, rate_summary, subclass_weight_curves,
)
from nplcm.mcmc.chains import run_chains
from nplcm.mcmc.draws import AddressBook, DrawsStore
from nplcm.middleware.error_handler import ModelError


@pytest.fixture
def fitted(toy_context, priors, short_chain):
    return run_chains(toy_context, priors, short_chain)


def test_posterior_band():
    band = posterior_band(np.arange(101.0)[:, None])
    assert band['mean'][0] == 50.0
    assert band['lo'][0] == pytest.approx(2.5)
    assert band['hi'][0] == pytest.approx(97.5)


def test_overall_pef_sums_to_one(fitted, toy_context):
    samples = overall_pef_draws(fitted, toy_context.cases.x_rows)
    assert samples.shape == (2 * 30, 2)
    np.testing.assert_allclose(samples.sum(axis=1), 1.0)
    table = overall_pef(fitted, toy_context.cases.x_rows)
    assert list(table['cause']) == ['A', 'B']
    assert table['mean'].sum() == pytest.approx(1.0)
    assert np.all(table['lo'] <= table['mean']) and np.all(table['mean'] <= table['hi'])


def test_overall_pef_without_cases(fitted):
    with pytest.raises(ModelError):
        overall_pef_draws(fitted, np.empty((0, 2)))


def test_pef_curve_shape(fitted, toy_context):
    curve = pef_curve(fitted, toy_context.etiology_design, np.array([[0.0], [1.0]]))
    assert len(curve) == 4
    assert list(curve['grid_point']) == [1, 1, 2, 2]
    np.testing.assert_allclose(curve.groupby('grid_point')['mean'].sum(), 1.0)


def test_individual_etiology_fractions(fitted, toy_context):
    table = ief_summary(fitted, toy_context, cases=[0, 2])
    assert list(table['case']) == [1, 1, 3, 3]
    np.testing.assert_allclose(table.groupby('case')['mean'].sum(), 1.0)
    with pytest.raises(ModelError):
        ief_summary(fitted, toy_context, cases=[4])


def test_identical_profiles_have_zero_contrast(fitted, toy_context):
    result = etiology_log_odds_contrast(fitted, toy_context.etiology_design, [1.0], [1.0], cause=1)
    assert result['cause'] == 'B'
    assert result['mean'] == 0.0
    assert result['lo'] == 0.0 and result['hi'] == 0.0


def test_contrast_against_reference_cause(toy_context):
    # intercept and slope on g for causes A, B and NoS
    coef = np.array([[0.2, 1.0], [0.0, -0.5], [0.3, 0.0]])
    book = AddressBook(groups=[('etiology', (3, 2))], cause_labels=['A', 'B', 'NoS'])
    store = DrawsStore(book=book, draws=coef.reshape(1, 1, 6), loglik=np.zeros((1, 1)),
                       class_counts=np.zeros((1, 1, 3)))
    design = toy_context.etiology_design

    versus_nos = etiology_log_odds_contrast(store, design, [1.0], [0.0], cause=0, reference=2)
    assert versus_nos['reference'] == 'NoS'
    assert versus_nos['mean'] == pytest.approx((1.2 - 0.3) - (0.2 - 0.3), abs=1e-12)
    assert etiology_log_odds_contrast(store, design, [1.0], [0.0], cause=1,
                                      reference=2)['mean'] == pytest.approx(-0.5, abs=1e-12)

    phi_a, phi_b = np.array([1.2, -0.5, 0.3]), np.array([0.2, 0.0, 0.3])
    pi_a, pi_b = np.exp(phi_a) / np.exp(phi_a).sum(), np.exp(phi_b) / np.exp(phi_b).sum()
    against_rest = etiology_log_odds_contrast(store, design, [1.0], [0.0], cause=0)
    assert against_rest['reference'] is None
    assert against_rest['mean'] == pytest.approx(
        np.log(pi_a[0] / (1 - pi_a[0])) - np.log(pi_b[0] / (1 - pi_b[0])), abs=1e-12)

    with pytest.raises(ModelError):
        etiology_log_odds_contrast(store, design, [1.0], [0.0], cause=2, reference=2)


def test_rate_summary(fitted):
    table = rate_summary(fitted)
    assert list(table['param'][:2]) == ['theta[1,1]', 'theta[1,2]']
    assert len(table) == 8
    assert table['mean'].between(0.0, 1.0).all()


def test_positive_rate_and_weight_curves(fitted, toy_context):
    grid = np.array([[0.0], [1.0], [0.5]])
    rates = fitted_positive_rate_curves(fitted, toy_context, grid, grid)
    assert set(rates['pathogen']) == {'A', 'B'}
    assert set(rates['side']) == {'case', 'control'}
    assert len(rates) == 2 * 2 * 3
    weights = subclass_weight_curves(fitted, toy_context, grid)
    np.testing.assert_allclose(weights.groupby(['side', 'grid_point'])['mean'].sum(), 1.0)


def test_mismatched_grids(fitted, toy_context):
    with pytest.raises(ModelError):
        fitted_positive_rate_curves(fitted, toy_context, np.zeros((2, 1)), np.zeros((3, 1)))


def _relabel_subclasses(store):
    """Swap subclasses 1 and 2 in every draw of a K=2 fit

    Rate columns trade places and negating the stick-breaking predictor
    (intercept and coefficients) exchanges the two weights.
    """
    names = store.names
    position = {name: i for i, name in enumerate(names)}
    draws = store.draws.copy()
    for i, name in enumerate(names):
        group, _, index = name.partition('[')
        if group in ('theta', 'psi'):
            j, k = index.rstrip(']').split(',')
            draws[:, :, i] = store.draws[:, :, position[f"{group}[{j},{3 - int(k)}]"]]
        elif group in ('mu_star', 'control', 'case'):
            draws[:, :, i] = -store.draws[:, :, i]
    return dataclasses.replace(store, draws=draws)


def test_summaries_ignore_subclass_labels(fitted, toy_context):
    relabeled = _relabel_subclasses(fitted)
    grid = np.array([[0.0], [1.0]])
    for summarize in (
        lambda store: overall_pef(store, toy_context.cases.x_rows),
        lambda store: ief_summary(store, toy_context),
        lambda store: fitted_positive_rate_curves(store, toy_context, grid, grid),
    ):
        pd.testing.assert_frame_equal(summarize(fitted), summarize(relabeled),
                                      check_exact=False, rtol=1e-10, atol=1e-12)
    weights = subclass_weight_curves(relabeled, toy_context, grid)
    original = subclass_weight_curves(fitted, toy_context, grid)
    np.testing.assert_allclose(weights['mean'].to_numpy().reshape(-1, 2)[:, ::-1].ravel(),
                               original['mean'].to_numpy(), rtol=1e-10)
