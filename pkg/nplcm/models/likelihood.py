"""
Likelihood Module
Exact probability computations for (n)pLCMs with and without covariates
"""
import math
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax

from nplcm.middleware.error_handler import ModelError
from nplcm.models.design import ModelContext, stratum_index
from nplcm.models.params import CASE, CONTROL, ParamState, RateParams, RegressionParams

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def _log_clamped(p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(log p, log(1-p)) with p clamped to [1e-12, 1-1e-12]"""
    p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return np.log(p), np.log1p(-p)


def log_bernoulli_product(m, s) -> np.ndarray:
    """log prod_j s_j^m_j (1-s_j)^(1-m_j); broadcasts over leading axes"""
    m = np.asarray(m, dtype=float)
    s = np.asarray(s, dtype=float)
    if m.shape[-1] != s.shape[-1]:
        raise ModelError(f"length mismatch: {m.shape[-1]} measurements, {s.shape[-1]} rates")
    log_s, log_1s = _log_clamped(s)
    return np.sum(m * log_s + (1.0 - m) * log_1s, axis=-1)


def bernoulli_product(m, s) -> np.ndarray:
    return np.exp(log_bernoulli_product(m, s))


def stick_break(g) -> np.ndarray:
    """
    Stick-breaking weights from K-1 break fractions

    w_k = g_k prod_{s<k}(1-g_s); the last weight is the complement so every
    row sums to one.
    """
    g = np.asarray(g, dtype=float)
    if np.any((g < 0.0) | (g > 1.0)):
        raise ModelError("break fractions must lie in [0, 1]")
    remaining = np.cumprod(1.0 - g, axis=-1)
    before = np.concatenate([np.ones(g.shape[:-1] + (1,)), remaining[..., :-1]], axis=-1)
    head = g * before
    last = np.clip(1.0 - head.sum(axis=-1, keepdims=True), 0.0, None)
    return np.concatenate([head, last], axis=-1)


def log_stick_break(alpha) -> np.ndarray:
    """Log stick-breaking weights from logistic-scale predictors, computed stably"""
    alpha = np.asarray(alpha, dtype=float)
    log_g = -np.logaddexp(0.0, -alpha)
    log_1g = -np.logaddexp(0.0, alpha)
    cum = np.cumsum(log_1g, axis=-1)
    before = np.concatenate([np.zeros(alpha.shape[:-1] + (1,)), cum], axis=-1)
    head = np.concatenate([log_g, np.zeros(alpha.shape[:-1] + (1,))], axis=-1)
    return head + before


def subclass_predictor(w_rows, params: RegressionParams, side: str) -> np.ndarray:
    """alpha_ik = mu_k + w_i^T Gamma_k for k = 1..K-1"""
    w_rows = np.atleast_2d(w_rows)
    coef = params.side(side)
    alpha = params.mu[None, :] + (w_rows @ coef.T if coef.size else 0.0)
    alpha = np.broadcast_to(alpha, (w_rows.shape[0], params.n_subclasses - 1))
    if not np.isfinite(alpha).all():
        raise ModelError(f"non-finite {side} subclass linear predictor")
    return alpha


def subclass_weights(w_rows, params: RegressionParams, side: str) -> np.ndarray:
    """
    Case (eta) or control (nu) subclass weights for design rows

    Args:
        w_rows: Subclass design rows (n x P_w) or a single row
        params: Regression parameters
        side: 'case' or 'control'
    """
    single = np.ndim(w_rows) == 1
    w_rows = np.atleast_2d(w_rows)
    if params.n_subclasses == 1:
        out = np.ones((w_rows.shape[0], 1))
    else:
        out = stick_break(expit(subclass_predictor(w_rows, params, side)))
    return out[0] if single else out


def log_subclass_weights(w_rows, params: RegressionParams, side: str) -> np.ndarray:
    w_rows = np.atleast_2d(w_rows)
    if params.n_subclasses == 1:
        return np.zeros((w_rows.shape[0], 1))
    return log_stick_break(subclass_predictor(w_rows, params, side))


def class_positive_rates(cause: Sequence[int], k: int, rates: RateParams) -> np.ndarray:
    """
    Positive rates p_kl for cause l in subclass k (0-based)

    TPR for causative pathogens, FPR otherwise; the empty cause is the FPR column.
    """
    p = rates.psi[:, k].copy()
    members = list(cause)
    p[members] = rates.theta[members, k]
    return p


def etiology_predictor(x_rows, params: RegressionParams) -> np.ndarray:
    x_rows = np.atleast_2d(x_rows)
    n_causes = params.etiology.shape[0]
    if params.etiology.shape[1] == 0:
        return np.zeros((x_rows.shape[0], n_causes))
    phi = x_rows @ params.etiology.T
    if not np.isfinite(phi).all():
        raise ModelError("non-finite etiology linear predictor")
    return phi


def log_etiology_probs(x_rows, params: RegressionParams) -> np.ndarray:
    x_rows = np.atleast_2d(x_rows)
    if params.etiology_table is not None:
        strata = stratum_index(params.etiology_strata, x_rows)
        with np.errstate(divide='ignore'):
            return np.log(params.etiology_table[strata])
    return log_softmax(etiology_predictor(x_rows, params), axis=1)


def etiology_probs(x_rows, params: RegressionParams) -> np.ndarray:
    """pi(x) by softmax over all L classes, or the stratum PEF in Dirichlet mode"""
    single = np.ndim(x_rows) == 1
    x_rows = np.atleast_2d(x_rows)
    if params.etiology_table is not None:
        out = params.etiology_table[stratum_index(params.etiology_strata, x_rows)]
    else:
        out = softmax(etiology_predictor(x_rows, params), axis=1)
    return out[0] if single else out


def log_brs_kernel(brs: np.ndarray, rates: RateParams, cause_matrix: np.ndarray) -> np.ndarray:
    """
    log Pi(M_i; p_kl) for every subject, cause and subclass

    Returns:
        Array of shape (n, L, K)
    """
    log_t, log_1t = _log_clamped(rates.theta)
    log_p, log_1p = _log_clamped(rates.psi)
    base = brs @ log_p + (1.0 - brs) @ log_1p
    shift = (brs[:, :, None] * (log_t - log_p)[None]
             + (1.0 - brs)[:, :, None] * (log_1t - log_1p)[None])
    return base[:, None, :] + np.einsum('lj,ijk->ilk', cause_matrix, shift)


def log_fpr_kernel(brs: np.ndarray, rates: RateParams) -> np.ndarray:
    """log Pi(M_i; psi_k), shape (n, K)"""
    log_p, log_1p = _log_clamped(rates.psi)
    return brs @ log_p + (1.0 - brs) @ log_1p


def log_ss_kernel(ss: np.ndarray, theta_ss: np.ndarray, ss_in_cause: np.ndarray) -> np.ndarray:
    """
    Silver-standard log-likelihood per case and cause, shape (n, L)

    Positives outside the cause are impossible (-inf); missing entries add 0.
    """
    n, n_causes = ss.shape[0], ss_in_cause.shape[0]
    if ss.shape[1] == 0:
        return np.zeros((n, n_causes))
    observed = ~np.isnan(ss)
    values = np.where(observed, ss, 0.0)
    log_t, log_1t = _log_clamped(theta_ss)
    inside = np.where(observed, values * log_t + (1.0 - values) * log_1t, 0.0)
    total = inside @ ss_in_cause.T.astype(float)
    forbidden = (observed & (values == 1.0)).astype(float) @ (~ss_in_cause).T.astype(float)
    return np.where(forbidden > 0, -np.inf, total)


def _fsum_rows(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def case_cell_matrix(context: ModelContext, params: ParamState,
                     rows: Optional[np.ndarray] = None) -> np.ndarray:
    """log P(M_i, SS_i | I_i = l) for cases (all, or the given row indices), shape (n, L)"""
    cases = context.cases
    index = slice(None) if rows is None else np.asarray(rows)
    brs = cases.brs[index]
    log_eta = log_subclass_weights(cases.w_rows[index], params.regression, CASE)
    kernel = log_brs_kernel(brs, params.rates, context.cause_matrix)
    cell = logsumexp(log_eta[:, None, :] + kernel, axis=2)
    if context.n_ss:
        cell = cell + log_ss_kernel(cases.ss[index], params.rates.theta_ss, context.ss_in_cause)
    return cell


def case_cell_loglik(context: ModelContext, i: int, cause: int, params: ParamState) -> float:
    """log-probability of case i's measurements given I_i = cause (0-based indices)"""
    if not 0 <= i < context.cases.n:
        raise ModelError(f"case index {i} out of range")
    return float(case_cell_matrix(context, params, rows=np.array([i]))[0, cause])


def case_loglik(context: ModelContext, params: ParamState) -> float:
    """sum over cases of log sum_l pi_l(X_i) exp(cell_il)"""
    if context.cases.n == 0:
        raise ModelError("empty case set")
    log_pi = log_etiology_probs(context.cases.x_rows, params.regression)
    per_case = logsumexp(log_pi + case_cell_matrix(context, params), axis=1)
    return _fsum_rows(per_case)


def control_loglik(context: ModelContext, params: ParamState) -> float:
    """sum over controls of log sum_k nu_k(W_i) Pi(M_i; psi_k)"""
    controls = context.controls
    if controls.n == 0:
        raise ModelError("empty control set")
    log_nu = log_subclass_weights(controls.w_rows, params.regression, CONTROL)
    per_control = logsumexp(log_nu + log_fpr_kernel(controls.brs, params.rates), axis=1)
    return _fsum_rows(per_control)


def total_loglik(context: ModelContext, params: ParamState) -> float:
    return case_loglik(context, params) + control_loglik(context, params)


def individual_etiology(context: ModelContext, params: ParamState,
                        rows: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Posterior cause probabilities per case given its data and the parameters

    Raises:
        ModelError: a case whose silver-standard pattern excludes every cause
    """
    index = slice(None) if rows is None else np.asarray(rows)
    log_pi = log_etiology_probs(context.cases.x_rows[index], params.regression)
    joint = log_pi + case_cell_matrix(context, params, rows=rows)
    impossible = np.isneginf(joint).all(axis=1)
    if impossible.any():
        raise ModelError(
            "data inconsistent with cause spec",
            payload={'cases': np.flatnonzero(impossible).tolist()},
        )
    return softmax(joint, axis=1)


def nocov_loglik(brs: np.ndarray, y: np.ndarray, causes: Sequence[Sequence[int]],
                 pi: np.ndarray, nu: np.ndarray, eta: np.ndarray, rates: RateParams,
                 ss: Optional[np.ndarray] = None, ss_index: Sequence[int] = ()) -> float:
    """
    npLCM log-likelihood without covariates

    Loops over causes and subclasses with explicit positive-rate vectors; used
    as the reference path for the regression likelihood.
    """
    brs = np.asarray(brs, dtype=float)
    cases, controls = brs[y == 1], brs[y == 0]
    K = len(nu)

    control_terms = np.stack(
        [np.log(nu[k]) + log_bernoulli_product(controls, rates.psi[:, k]) for k in range(K)],
        axis=1,
    )
    case_terms = []
    for l, cause in enumerate(causes):
        cell = np.stack(
            [np.log(eta[k]) + log_bernoulli_product(cases, class_positive_rates(cause, k, rates))
             for k in range(K)],
            axis=1,
        )
        term = logsumexp(cell, axis=1)
        if ss is not None and len(ss_index):
            ss_cases = ss[y == 1]
            for s, j in enumerate(ss_index):
                col = ss_cases[:, s]
                observed = ~np.isnan(col)
                if j in cause:
                    p = np.clip(rates.theta_ss[s], PROB_FLOOR, 1 - PROB_FLOOR)
                    term = term + np.where(observed, np.where(col == 1, np.log(p), np.log1p(-p)), 0.0)
                else:
                    term = term + np.where(observed & (col == 1), -np.inf, 0.0)
        with np.errstate(divide='ignore'):
            case_terms.append(np.log(pi[l]) + term)
    per_case = logsumexp(np.stack(case_terms, axis=1), axis=1)
    per_control = logsumexp(control_terms, axis=1)
    return math.fsum(per_case.tolist()) + math.fsum(per_control.tolist())


def plcm_loglik(brs: np.ndarray, y: np.ndarray, causes: Sequence[Sequence[int]],
                pi: np.ndarray, theta: np.ndarray, psi: np.ndarray) -> float:
    """Partially-latent class model (local independence) log-likelihood"""
    brs = np.asarray(brs, dtype=float)
    cases, controls = brs[y == 1], brs[y == 0]
    per_case = []
    for l, cause in enumerate(causes):
        p = psi.copy()
        p[list(cause)] = theta[list(cause)]
        per_case.append(np.log(pi[l]) + log_bernoulli_product(cases, p))
    total = logsumexp(np.stack(per_case, axis=1), axis=1)
    return math.fsum(total.tolist()) + math.fsum(log_bernoulli_product(controls, psi).tolist())


def _check_singleton(causes: Sequence[Sequence[int]], cause: int) -> int:
    members = tuple(causes[cause])
    if len(members) != 1:
        raise ModelError(
            f"cause {cause} is not a single-pathogen cause; use case_marginal_positive_rate"
        )
    j = members[0]
    if any(j in c for l, c in enumerate(causes) if l != cause):
        raise ModelError(
            f"pathogen {j} appears in other causes; use case_marginal_positive_rate"
        )
    return j


def positive_rate_curve(x_rows, w_rows, cause: int, params: ParamState,
                        causes: Sequence[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Case and control marginal positive rates of a singleton cause's pathogen

    Returns:
        (case rate, control rate) per covariate row
    """
    j = _check_singleton(causes, cause)
    pi = etiology_probs(np.atleast_2d(x_rows), params.regression)[:, cause]
    eta = subclass_weights(np.atleast_2d(w_rows), params.regression, CASE)
    nu = subclass_weights(np.atleast_2d(w_rows), params.regression, CONTROL)
    theta, psi = params.rates.theta[j], params.rates.psi[j]
    case_rate = pi * (eta @ theta) + (1.0 - pi) * (eta @ psi)
    return case_rate, nu @ psi


def case_marginal_positive_rate(x_rows, w_rows, pathogen: int, params: ParamState,
                                causes: Sequence[Sequence[int]]) -> np.ndarray:
    """sum_l pi_l(x) sum_k eta_k(w) p_kl^(j), valid for any cause specification"""
    pi = etiology_probs(np.atleast_2d(x_rows), params.regression)
    eta = subclass_weights(np.atleast_2d(w_rows), params.regression, CASE)
    theta, psi = params.rates.theta[pathogen], params.rates.psi[pathogen]
    per_cause = np.stack(
        [eta @ (theta if pathogen in cause else psi) for cause in causes], axis=1
    )
    return np.sum(pi * per_cause, axis=1)
