"""
Data Generator
Draws case-control BrS/SS datasets and their latent truth records from a TruthConfig
"""
import logging
from typing import List, Tuple

import numpy as np
import pandas as pd

from nplcm.data.dataset import Dataset, standardize_continuous
from nplcm.simulate.truth import TruthConfig

logger = logging.getLogger(__name__)


def _draw_categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """0-based categorical draws, one per row, by inverse CDF"""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cum[:, -1]
    return np.minimum((cum < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def covariate_columns(truth: TruthConfig) -> List[str]:
    """Names shared by the x_ and w_ blocks: s2..sS dummies, then t"""
    names = [f"s{level}" for level in range(2, truth.covariates.n_strata + 1)]
    if truth.covariates.dates:
        names.append('t')
    return names


def _design(stratum: np.ndarray, t: np.ndarray, truth: TruthConfig) -> np.ndarray:
    columns = [(stratum == level).astype(float)
               for level in range(2, truth.covariates.n_strata + 1)]
    if truth.covariates.dates:
        columns.append(t)
    if not columns:
        return np.zeros((stratum.size, 0))
    return np.column_stack(columns)


def generate(truth: TruthConfig, seed=None) -> Tuple[Dataset, pd.DataFrame]:
    """
    Simulate one dataset

    Subjects are laid out stratum by stratum, cases before controls. The
    random stream is consumed in a fixed order: dates, disease classes, case
    subclasses, control subclasses, BrS, SS.

    Args:
        truth: Data-generating mechanism
        seed: Overrides truth.seed (int or SeedSequence)

    Returns:
        (Dataset, truth record with per-subject stratum, t, I, Z and pi0)
    """
    rng = np.random.default_rng(truth.seed if seed is None else seed)
    rule = truth.covariates
    pathogens = list(truth.pathogens)
    causes = truth.causes.resolve(pathogens)
    J, K, L = len(pathogens), truth.k_subclasses, len(causes)

    y_parts, stratum_parts = [], []
    for level in range(1, rule.n_strata + 1):
        y_parts += [np.ones(rule.cases_per_stratum, dtype=int),
                    np.zeros(rule.controls_per_stratum, dtype=int)]
        stratum_parts.append(np.full(rule.cases_per_stratum + rule.controls_per_stratum, level))
    y = np.concatenate(y_parts)
    stratum = np.concatenate(stratum_parts)
    N = y.size
    case = y == 1

    if rule.dates:
        days = rng.integers(0, rule.window_days, size=N).astype(float)
        t, _, _ = standardize_continuous(days)
    else:
        days = np.zeros(N)
        t = np.zeros(N)

    pi0 = truth.pef(stratum[case], t[case])
    disease = _draw_categorical(rng, pi0)
    case_sub = _draw_categorical(rng, truth.case_subclass.probabilities(stratum[case], t[case]))
    control_sub = _draw_categorical(rng, truth.control_subclass.probabilities(stratum[~case], t[~case]))

    theta, psi = truth.rate_matrix('theta'), truth.rate_matrix('psi')
    cause_matrix = np.zeros((L, J))
    for l, cause in enumerate(causes):
        cause_matrix[l, list(cause)] = 1.0

    positive = np.empty((N, J))
    causal = cause_matrix[disease]
    positive[case] = causal * theta[:, case_sub].T + (1.0 - causal) * psi[:, case_sub].T
    positive[~case] = psi[:, control_sub].T
    brs = (rng.random((N, J)) < positive).astype(int)

    ss_index = tuple(pathogens.index(name) for name in truth.ss_pathogens)
    ss = np.full((N, len(ss_index)), np.nan)
    if ss_index:
        theta_ss = truth.theta_ss_vector()
        draws = rng.random((int(case.sum()), len(ss_index)))
        in_cause = causal[:, list(ss_index)]
        ss[case] = ((draws < theta_ss[None, :]) & (in_cause == 1.0)).astype(float)

    design = _design(stratum, t, truth)
    names = tuple(covariate_columns(truth))
    x_design = design.copy()
    x_design[~case] = 0.0
    dataset = Dataset(
        brs=brs, y=y, x_design=x_design, w_design=design, pathogens=tuple(pathogens),
        ss=ss, ss_index=ss_index, x_columns=names, w_columns=names,
    )

    labels = truth.cause_labels
    record = pd.DataFrame({
        'subject': np.arange(1, N + 1),
        'y': y,
        'stratum': stratum,
        'day': days.astype(int),
        't': t,
        'I': np.zeros(N, dtype=int),
        'Z': np.zeros(N, dtype=int),
    })
    record.loc[case, 'I'] = disease + 1
    record.loc[case, 'Z'] = case_sub + 1
    record.loc[~case, 'Z'] = control_sub + 1
    for l, label in enumerate(labels):
        column = np.full(N, np.nan)
        column[case] = pi0[:, l]
        record[f"pi_{label}"] = column

    logger.info(f"Simulated '{truth.name}': {int(case.sum())} cases, {int((~case).sum())} controls, "
                f"J={J}, L={L}, K={K}")
    return dataset, record


def true_overall_pef(record: pd.DataFrame, labels: List[str]) -> np.ndarray:
    """Empirical average of pi0 over the simulated cases"""
    cases = record[record['y'] == 1]
    return np.array([cases[f"pi_{label}"].mean() for label in labels])


def true_stratum_pef(truth: TruthConfig) -> np.ndarray:
    """(n_strata, L) true PEFs at t = 0"""
    levels = np.arange(1, truth.covariates.n_strata + 1)
    return truth.pef(levels, np.zeros(levels.size))
