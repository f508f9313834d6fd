"""
Shared fixtures: small hand-built datasets and model contexts
"""
import numpy as np
import pytest

from nplcm.data.dataset import Dataset
from nplcm.data.schemas import CauseSpec, ChainConfig, ModelSpec, PriorConfig, TermSpec
from nplcm.models.design import build_context
from nplcm.models.params import ParamState, RateParams, RegressionParams


def make_dataset(brs, y, g=None, ss=None, ss_index=()):
    """Dataset over pathogens A, B, ... with an optional binary covariate g in X and W"""
    brs = np.asarray(brs, dtype=np.int8)
    y = np.asarray(y, dtype=np.int8)
    names = tuple("ABCDEFGH"[:brs.shape[1]])
    if g is None:
        x = w = np.empty((len(y), 0))
        columns = ()
    else:
        g = np.asarray(g, dtype=float)
        x = np.where(y == 1, g, 0.0)[:, None]
        w = g[:, None]
        columns = ('g',)
    return Dataset(
        brs=brs, y=y, x_design=x, w_design=w, pathogens=names,
        ss=np.empty((len(y), 0)) if ss is None else np.asarray(ss, dtype=float),
        ss_index=tuple(ss_index), x_columns=columns, w_columns=columns,
    )


def make_params(theta, psi, etiology, mu_star=(), control=None, case=None, theta_ss=()):
    """ParamState from plain arrays; subclass coefficients default to no covariates"""
    theta = np.asarray(theta, dtype=float)
    mu_star = np.asarray(mu_star, dtype=float)
    n_seg = mu_star.size
    regression = RegressionParams(
        etiology=np.asarray(etiology, dtype=float),
        control=np.zeros((n_seg, 0)) if control is None else np.asarray(control, dtype=float),
        case=np.zeros((n_seg, 0)) if case is None else np.asarray(case, dtype=float),
        mu_star=mu_star,
        tau0=np.ones(n_seg),
        u=np.tril(np.ones((n_seg, n_seg))),
    )
    rates = RateParams(theta, np.asarray(psi, dtype=float), np.asarray(theta_ss, dtype=float))
    return ParamState(rates, regression)


@pytest.fixture
def toy_dataset():
    """Four cases and four controls, J=2, one binary covariate"""
    brs = [[1, 0], [0, 1], [1, 1], [0, 0], [0, 0], [1, 0], [0, 1], [0, 0]]
    y = [1, 1, 1, 1, 0, 0, 0, 0]
    g = [0, 1, 0, 1, 0, 1, 0, 1]
    return make_dataset(brs, y, g)


@pytest.fixture
def toy_spec():
    return ModelSpec(
        cause_spec=CauseSpec.singletons(['A', 'B']),
        k_subclasses=2,
        etiology_formula=[TermSpec(kind='linear', column='g')],
        subclass_formula=[TermSpec(kind='linear', column='g')],
    )


@pytest.fixture
def toy_context(toy_dataset, toy_spec):
    return build_context(toy_dataset, toy_spec)


@pytest.fixture
def priors():
    return PriorConfig()


@pytest.fixture
def short_chain():
    return ChainConfig(n_chains=2, n_burnin=20, n_keep=30, seed=11)
