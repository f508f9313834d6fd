"""
Posterior Summaries
PEF curves, overall PEFs, positive-rate bands and individual etiology fractions
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import logit, softmax

from nplcm.middleware.error_handler import ModelError
from nplcm.models.design import AdditiveDesign, ModelContext, stratum_index
from nplcm.models.likelihood import (
    individual_etiology, positive_rate_curve, subclass_weights,
)
from nplcm.models.params import CASE, CONTROL

logger = logging.getLogger(__name__)

CRI_LEVELS = (0.025, 0.975)
MAX_CELLS = 5_000_000


def posterior_band(samples: np.ndarray) -> Dict[str, np.ndarray]:
    """Mean and equal-tailed 95% interval over axis 0 (type-7 quantiles)"""
    lo, hi = np.quantile(samples, CRI_LEVELS, axis=0)
    return {'mean': samples.mean(axis=0), 'lo': lo, 'hi': hi}


def etiology_draws(draws, x_rows: np.ndarray) -> np.ndarray:
    """
    pi(x) for every pooled draw and design row

    Returns:
        (draws, rows, L)
    """
    x_rows = np.atleast_2d(x_rows)
    L = len(draws.book.cause_labels)
    if draws.book.has_group('etiology_table'):
        table = draws.group('etiology_table')
        table = table.reshape(-1, *table.shape[2:])
        strata = stratum_index(np.asarray(draws.book.strata_rows, dtype=float), x_rows)
        return table[:, strata, :]
    if not draws.book.has_group('etiology'):
        return np.full((draws.n_chains * draws.n_draws, x_rows.shape[0], L), 1.0 / L)
    coef = draws.group('etiology')
    coef = coef.reshape(-1, *coef.shape[2:])
    return softmax(np.einsum('np,blp->bnl', x_rows, coef), axis=2)


def _row_chunks(n_draws: int, n_rows: int, n_causes: int):
    size = max(1, MAX_CELLS // max(1, n_draws * n_causes))
    for start in range(0, n_rows, size):
        yield slice(start, min(start + size, n_rows))


def pef_curve(draws, design: AdditiveDesign, grid: np.ndarray) -> pd.DataFrame:
    """
    Posterior mean and 95% band of pi_l at each grid point

    Args:
        draws: DrawsStore
        design: Fitted etiology design (frozen standardization and basis)
        grid: Raw covariate rows laid out like the design's source columns
    """
    x_rows = design.transform(grid)
    labels = draws.book.cause_labels
    B = draws.n_chains * draws.n_draws
    frames = []
    for rows in _row_chunks(B, x_rows.shape[0], len(labels)):
        band = posterior_band(etiology_draws(draws, x_rows[rows]))
        n = band['mean'].shape[0]
        frames.append(pd.DataFrame({
            'grid_point': np.repeat(np.arange(rows.start, rows.start + n) + 1, len(labels)),
            'cause': np.tile(labels, n),
            'mean': band['mean'].ravel(),
            'lo': band['lo'].ravel(),
            'hi': band['hi'].ravel(),
        }))
    return pd.concat(frames, ignore_index=True)


def overall_pef_draws(draws, case_x_rows: np.ndarray) -> np.ndarray:
    """(draws, L) empirical average of pi(X_i) over case rows, per draw"""
    case_x_rows = np.atleast_2d(case_x_rows)
    if case_x_rows.shape[0] == 0:
        raise ModelError("overall PEF needs at least one case row")
    L = len(draws.book.cause_labels)
    B = draws.n_chains * draws.n_draws
    total = np.zeros((B, L))
    for rows in _row_chunks(B, case_x_rows.shape[0], L):
        total += etiology_draws(draws, case_x_rows[rows]).sum(axis=1)
    return total / case_x_rows.shape[0]


def overall_pef(draws, case_x_rows: np.ndarray) -> pd.DataFrame:
    """Posterior of pi*_l = N_1^{-1} sum_i pi_l(X_i)"""
    samples = overall_pef_draws(draws, case_x_rows)
    band = posterior_band(samples)
    return pd.DataFrame({
        'cause': draws.book.cause_labels,
        'mean': band['mean'],
        'sd': samples.std(axis=0, ddof=1) if samples.shape[0] > 1 else np.zeros(samples.shape[1]),
        'lo': band['lo'],
        'hi': band['hi'],
    })


def fitted_positive_rate_curves(draws, context: ModelContext, grid_x: np.ndarray,
                                grid_w: np.ndarray, pathogens: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """
    Case and control marginal positive-rate bands per pathogen

    Pathogens default to those with a single-pathogen cause of their own.
    """
    x_rows = context.etiology_design.transform(grid_x)
    w_rows = context.subclass_design.transform(grid_w)
    if x_rows.shape[0] != w_rows.shape[0]:
        raise ModelError("grid_x and grid_w must have the same number of rows")
    singletons = context.singleton_causes()
    if pathogens is None:
        pathogens = sorted(singletons)
    missing = [j for j in pathogens if j not in singletons]
    if missing or not pathogens:
        raise ModelError(f"pathogens {missing} have no single-pathogen cause")

    B, n = draws.n_chains * draws.n_draws, x_rows.shape[0]
    case_rates = np.empty((len(pathogens), B, n))
    control_rates = np.empty((len(pathogens), B, n))
    for b, params in enumerate(draws.param_states()):
        for p, j in enumerate(pathogens):
            case_rates[p, b], control_rates[p, b] = positive_rate_curve(
                x_rows, w_rows, singletons[j], params, context.causes)

    frames = []
    names = context.dataset.pathogens
    for p, j in enumerate(pathogens):
        for side, rates in ((CASE, case_rates[p]), (CONTROL, control_rates[p])):
            band = posterior_band(rates)
            frames.append(pd.DataFrame({
                'grid_point': np.arange(1, n + 1), 'pathogen': names[j], 'side': side,
                'mean': band['mean'], 'lo': band['lo'], 'hi': band['hi'],
            }))
    return pd.concat(frames, ignore_index=True)


def subclass_weight_curves(draws, context: ModelContext, grid_w: np.ndarray) -> pd.DataFrame:
    """Posterior bands of nu_k(w) and eta_k(w)"""
    w_rows = context.subclass_design.transform(grid_w)
    K, n = context.n_subclasses, w_rows.shape[0]
    weights = {CASE: [], CONTROL: []}
    for params in draws.param_states():
        for side in weights:
            weights[side].append(subclass_weights(w_rows, params.regression, side))
    frames = []
    for side, samples in weights.items():
        band = posterior_band(np.stack(samples))
        frames.append(pd.DataFrame({
            'grid_point': np.repeat(np.arange(1, n + 1), K), 'side': side,
            'subclass': np.tile(np.arange(1, K + 1), n),
            'mean': band['mean'].ravel(), 'lo': band['lo'].ravel(), 'hi': band['hi'].ravel(),
        }))
    return pd.concat(frames, ignore_index=True)


def ief_summary(draws, context: ModelContext, cases: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """
    Posterior mean cause probabilities per case

    Args:
        cases: 0-based case indices (default all cases)

    Raises:
        ModelError: case index out of range
    """
    n_cases = context.cases.n
    rows = np.arange(n_cases) if cases is None else np.asarray(cases, dtype=int)
    if rows.size and (rows.min() < 0 or rows.max() >= n_cases):
        raise ModelError(f"case index out of range 0..{n_cases - 1}")
    total = np.zeros((rows.size, context.n_causes))
    count = 0
    for params in draws.param_states():
        total += individual_etiology(context, params, rows=rows)
        count += 1
    mean = total / count
    labels = draws.book.cause_labels
    return pd.DataFrame({
        'case': np.repeat(rows + 1, len(labels)),
        'cause': np.tile(labels, rows.size),
        'mean': mean.ravel(),
    })


def etiology_log_odds_contrast(draws, design: AdditiveDesign, profile_a, profile_b,
                               cause: int, reference: Optional[int] = None) -> Dict[str, object]:
    """
    Posterior log odds ratio of a cause between two covariate profiles

    With a reference cause r the odds are pi_l / pi_r, so the contrast is
    log(pi_l / pi_r)(a) - log(pi_l / pi_r)(b); without one they are
    pi_l / (1 - pi_l).

    Args:
        profile_a, profile_b: Raw covariate rows
        cause: 0-based cause index
        reference: 0-based index of the reference cause (e.g. NoS)
    """
    if reference is not None and reference == cause:
        raise ModelError("reference cause must differ from the contrasted cause")
    rows = design.transform(np.vstack([np.atleast_2d(profile_a), np.atleast_2d(profile_b)]))
    pi = np.clip(etiology_draws(draws, rows), 1e-300, 1.0)
    if reference is None:
        log_odds = logit(np.clip(pi[:, :, cause], 1e-300, 1.0 - 1e-16))
    else:
        log_odds = np.log(pi[:, :, cause]) - np.log(pi[:, :, reference])
    samples = log_odds[:, 0] - log_odds[:, 1]
    band = posterior_band(samples)
    labels = draws.book.cause_labels
    return {'cause': labels[cause],
            'reference': None if reference is None else labels[reference],
            'mean': float(band['mean']), 'lo': float(band['lo']), 'hi': float(band['hi'])}


def rate_summary(draws) -> pd.DataFrame:
    """Posterior mean and band of every rate parameter (theta, psi, theta_ss)"""
    frames = []
    for group in ('theta', 'psi', 'theta_ss'):
        if not draws.book.has_group(group):
            continue
        samples = draws.group(group)
        samples = samples.reshape(-1, int(np.prod(samples.shape[2:])))
        band = posterior_band(samples)
        names = [n for n in draws.names if n.startswith(f"{group}[")]
        frames.append(pd.DataFrame({'param': names, 'mean': band['mean'],
                                    'lo': band['lo'], 'hi': band['hi']}))
    return pd.concat(frames, ignore_index=True)
