"""
Gibbs Updates
Full-conditional draws for latents, rates, regression blocks and smoothing states
"""
import logging
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from nplcm.data.schemas import ChainConfig, PriorConfig
from nplcm.middleware.error_handler import ModelError, SamplerError
from nplcm.models.design import ModelContext
from nplcm.models.likelihood import (
    etiology_predictor, log_brs_kernel, log_etiology_probs, log_fpr_kernel, log_ss_kernel,
    log_subclass_weights,
)
from nplcm.models.params import (
    CASE, CONTROL, ETIOLOGY, SIDES, LatentState, ParamState, RateParams,
)
from nplcm.priors.distributions import (
    intercept_prior_logpdf, linear_prior_logpdf, sample_tau_given_xi,
    smoothing_indicator_prob, smoothness_update, spline_prior_logpdf, update_tau0,
)
from nplcm.mcmc.state import PriorArrays, interior_probs

logger = logging.getLogger(__name__)


def sample_categorical(rng: np.random.Generator, log_weights: np.ndarray) -> np.ndarray:
    """One categorical draw per row of unnormalized log weights (inverse CDF)"""
    probs = softmax(log_weights, axis=1)
    cum = np.cumsum(probs, axis=1)
    u = rng.random(log_weights.shape[0])
    index = (cum < u[:, None] * cum[:, -1:]).sum(axis=1)
    return np.minimum(index, log_weights.shape[1] - 1)


# --- Latent allocations ---

def update_latents(context: ModelContext, params: ParamState,
                   rng: np.random.Generator) -> LatentState:
    """
    Exact blocked draw of (I_i, Z_i) for cases and Z_i for controls

    I_i is drawn with the subclass summed out, then Z_i given I_i.
    """
    cases, controls = context.cases, context.controls
    regression, rates = params.regression, params.rates

    log_eta = log_subclass_weights(cases.w_rows, regression, CASE)
    joint = log_eta[:, None, :] + log_brs_kernel(cases.brs, rates, context.cause_matrix)
    cell = logsumexp(joint, axis=2)
    if context.n_ss:
        cell = cell + log_ss_kernel(cases.ss, rates.theta_ss, context.ss_in_cause)
    post = log_etiology_probs(cases.x_rows, regression) + cell
    impossible = np.isneginf(post).all(axis=1)
    if impossible.any():
        raise ModelError("data inconsistent with cause spec",
                         payload={'cases': np.flatnonzero(impossible).tolist()})

    case_class = sample_categorical(rng, post)
    case_subclass = sample_categorical(rng, joint[np.arange(cases.n), case_class, :])

    log_nu = log_subclass_weights(controls.w_rows, regression, CONTROL)
    control_subclass = sample_categorical(rng, log_nu + log_fpr_kernel(controls.brs, rates))
    return LatentState(case_class, case_subclass, control_subclass)


# --- Rates ---

def rate_counts(context: ModelContext, latents: LatentState) -> Dict[str, np.ndarray]:
    """Positive/negative counts behind the Beta full conditionals"""
    K = context.n_subclasses
    cases, controls = context.cases, context.controls
    onehot_case = np.eye(K)[latents.case_subclass]
    onehot_control = np.eye(K)[latents.control_subclass]
    causal = context.cause_matrix[latents.case_class]

    m = cases.brs
    theta_pos = (m * causal).T @ onehot_case
    theta_neg = ((1.0 - m) * causal).T @ onehot_case
    psi_pos = controls.brs.T @ onehot_control + (m * (1.0 - causal)).T @ onehot_case
    psi_neg = ((1.0 - controls.brs).T @ onehot_control
               + ((1.0 - m) * (1.0 - causal)).T @ onehot_case)

    counts = {'theta_pos': theta_pos, 'theta_neg': theta_neg,
              'psi_pos': psi_pos, 'psi_neg': psi_neg}
    if context.n_ss:
        inside = context.ss_in_cause[latents.case_class]
        observed = ~np.isnan(cases.ss)
        values = np.where(observed, cases.ss, 0.0)
        use = inside & observed
        counts['ss_pos'] = np.sum(np.where(use, values, 0.0), axis=0)
        counts['ss_neg'] = np.sum(np.where(use, 1.0 - values, 0.0), axis=0)
    return counts


def update_rates(context: ModelContext, latents: LatentState, arrays: PriorArrays,
                 rng: np.random.Generator) -> RateParams:
    """Beta-Bernoulli conjugate draws of theta, psi and theta_ss"""
    counts = rate_counts(context, latents)
    a, b = arrays.tpr_brs[:, 0:1], arrays.tpr_brs[:, 1:2]
    theta = rng.beta(a + counts['theta_pos'], b + counts['theta_neg'])
    psi = rng.beta(arrays.fpr[0] + counts['psi_pos'], arrays.fpr[1] + counts['psi_neg'])
    if context.n_ss:
        theta_ss = rng.beta(arrays.tpr_ss[:, 0] + counts['ss_pos'],
                            arrays.tpr_ss[:, 1] + counts['ss_neg'])
    else:
        theta_ss = np.empty(0)
    return RateParams(interior_probs(theta), interior_probs(psi), interior_probs(theta_ss))


# --- Metropolis machinery ---

def random_walk_step(rng: np.random.Generator, current: np.ndarray, log_target_current: float,
                     log_target: Callable[[np.ndarray], float],
                     scale: float) -> Tuple[np.ndarray, float, float]:
    """
    One Gaussian random-walk Metropolis step

    Returns:
        (state, its log target, acceptance probability min(1, exp(delta)))
    """
    if not np.isfinite(log_target_current):
        raise SamplerError("non-finite log posterior at the current state")
    proposal = current + scale * rng.standard_normal(current.shape)
    log_target_proposal = log_target(proposal)
    delta = log_target_proposal - log_target_current
    accept_prob = 1.0 if delta >= 0 else (float(np.exp(delta)) if np.isfinite(delta) else 0.0)
    if rng.random() < accept_prob:
        return proposal, log_target_proposal, accept_prob
    return current, log_target_current, accept_prob


class AdaptiveScales:
    """
    Per-block proposal scales with Robbins-Monro adaptation on the log scale

    Adaptation only runs while adapt=True (burn-in); the acceptance ledger
    records burn-in and sampling phases separately.
    """

    def __init__(self, config: ChainConfig):
        self.initial = float(config.initial_scale)
        self.exponent = config.adaptation_exponent
        self.target_1d = config.target_acceptance_1d
        self.target = config.target_acceptance
        self.log_scale: Dict[str, float] = {}
        self.n_adapt: Dict[str, int] = {}
        self.ledger: Dict[str, Dict[str, List[float]]] = {'burnin': {}, 'sampling': {}}

    def scale(self, name: str) -> float:
        return float(np.exp(self.log_scale.get(name, np.log(self.initial))))

    def record(self, name: str, dim: int, accept_prob: float, adapt: bool) -> None:
        phase = 'burnin' if adapt else 'sampling'
        entry = self.ledger[phase].setdefault(name, [0.0, 0])
        entry[0] += accept_prob
        entry[1] += 1
        if adapt:
            t = self.n_adapt.get(name, 0) + 1
            self.n_adapt[name] = t
            target = self.target_1d if dim == 1 else self.target
            current = self.log_scale.get(name, np.log(self.initial))
            self.log_scale[name] = current + t ** (-self.exponent) * (accept_prob - target)

    def acceptance_rates(self, phase: str = 'sampling') -> Dict[str, float]:
        return {name: total / count for name, (total, count) in sorted(self.ledger[phase].items())
                if count}

    def state_dict(self) -> Dict:
        return {'log_scale': dict(self.log_scale), 'n_adapt': dict(self.n_adapt),
                'ledger': {p: {k: list(v) for k, v in d.items()} for p, d in self.ledger.items()}}

    def load_state_dict(self, state: Dict) -> None:
        self.log_scale = dict(state['log_scale'])
        self.n_adapt = dict(state['n_adapt'])
        self.ledger = {p: {k: list(v) for k, v in d.items()} for p, d in state['ledger'].items()}


def _coef_prior(coef_block: np.ndarray, block, tau_row: np.ndarray, design,
                priors: PriorConfig) -> float:
    if block.spline_index is None:
        return linear_prior_logpdf(coef_block, priors.linear_sd)
    term = design.spline_terms[block.spline_index]
    return spline_prior_logpdf(coef_block, tau_row[block.spline_index],
                               term.basis.penalty, priors.k_beta)


# --- Etiology regression ---

def _softmax_loglik(phi: np.ndarray, classes: np.ndarray) -> float:
    return float(np.sum(phi[np.arange(phi.shape[0]), classes] - logsumexp(phi, axis=1)))


def update_etiology_blocks(context: ModelContext, params: ParamState, latents: LatentState,
                           priors: PriorConfig, scales: AdaptiveScales,
                           rng: np.random.Generator, adapt: bool) -> None:
    """Random-walk Metropolis over each (cause, term block) of the multinomial logit"""
    design = context.etiology_design
    x_rows = context.cases.x_rows
    coef = params.regression.etiology
    tau = params.smoothing.tau[ETIOLOGY]
    classes = latents.case_class
    phi = etiology_predictor(x_rows, params.regression).copy()

    for l in range(context.n_causes):
        for block in design.update_blocks():
            cols = block.columns
            name = f"etiology[{l + 1}].{block.name}"

            def log_target(values, l=l, cols=cols, block=block):
                row = coef[l].copy()
                row[cols] = values
                trial = phi.copy()
                trial[:, l] = x_rows @ row
                return (_softmax_loglik(trial, classes)
                        + _coef_prior(values, block, tau[l], design, priors))

            current = coef[l, cols].copy()
            new, _, accept_prob = random_walk_step(
                rng, current, log_target(current), log_target, scales.scale(name))
            coef[l, cols] = new
            phi[:, l] = x_rows @ coef[l]
            scales.record(name, block.width, accept_prob, adapt)


def update_etiology_dirichlet(context: ModelContext, params: ParamState, latents: LatentState,
                              priors: PriorConfig, rng: np.random.Generator) -> None:
    """Conjugate Dirichlet draw of each stratum's PEF vector"""
    S, L = context.strata_rows.shape[0], context.n_causes
    counts = np.zeros((S, L))
    np.add.at(counts, (context.case_strata, latents.case_class), 1.0)
    table = np.vstack([rng.dirichlet(priors.dirichlet_alpha + counts[s]) for s in range(S)])
    params.regression.etiology_table = np.clip(table, np.finfo(float).tiny, None)


# --- Subclass regressions ---

def _stick_loglik(alpha: np.ndarray, subclass: np.ndarray, k: int) -> float:
    """Binary stopping log-likelihood of stick segment k over subjects at risk"""
    at_risk = subclass >= k
    if not at_risk.any():
        return 0.0
    a = alpha[at_risk]
    stop = subclass[at_risk] == k
    return float(np.sum(np.where(stop, -np.logaddexp(0.0, -a), -np.logaddexp(0.0, a))))


def _side_subclass(latents: LatentState, side: str) -> np.ndarray:
    return latents.control_subclass if side == CONTROL else latents.case_subclass


def _side_rows(context: ModelContext, side: str) -> np.ndarray:
    return context.controls.w_rows if side == CONTROL else context.cases.w_rows


def update_subclass_blocks(context: ModelContext, params: ParamState, latents: LatentState,
                           priors: PriorConfig, scales: AdaptiveScales,
                           rng: np.random.Generator, adapt: bool) -> None:
    """Random-walk Metropolis over each (side, segment, term block)"""
    design = context.subclass_design
    mu = params.regression.mu
    for side in SIDES:
        coef = params.regression.side(side)
        tau = params.smoothing.tau[side]
        rows = _side_rows(context, side)
        subclass = _side_subclass(latents, side)
        for k in range(context.n_subclasses - 1):
            for block in design.update_blocks():
                cols = block.columns
                name = f"{side}[{k + 1}].{block.name}"

                def log_target(values, k=k, cols=cols, block=block):
                    row = coef[k].copy()
                    row[cols] = values
                    return (_stick_loglik(mu[k] + rows @ row, subclass, k)
                            + _coef_prior(values, block, tau[k], design, priors))

                current = coef[k, cols].copy()
                new, _, accept_prob = random_walk_step(
                    rng, current, log_target(current), log_target, scales.scale(name))
                coef[k, cols] = new
                scales.record(name, block.width, accept_prob, adapt)


def update_intercepts(context: ModelContext, params: ParamState, latents: LatentState,
                      priors: PriorConfig, scales: AdaptiveScales,
                      rng: np.random.Generator, adapt: bool) -> None:
    """
    Shared intercepts mu* on the log scale (with Jacobian), then their precisions

    mu*_j moves every segment k with u[k, j] != 0 on both sides.
    """
    regression = params.regression
    K = context.n_subclasses
    offsets = {side: _side_rows(context, side) @ regression.side(side).T for side in SIDES}

    for j in range(K - 1):
        affected = np.flatnonzero(regression.u[:, j])
        name = f"mu_star[{j + 1}]"

        def log_target(log_value, j=j, affected=affected):
            mu_star = regression.mu_star.copy()
            mu_star[j] = np.exp(log_value[0])
            mu = regression.u @ mu_star
            total = 0.0
            for side in SIDES:
                subclass = _side_subclass(latents, side)
                for k in affected:
                    total += _stick_loglik(mu[k] + offsets[side][:, k], subclass, k)
            prior = float(intercept_prior_logpdf(mu_star[j], regression.tau0[j]))
            return total + prior + float(log_value[0])

        current = np.array([np.log(regression.mu_star[j])])
        new, _, accept_prob = random_walk_step(
            rng, current, log_target(current), log_target, scales.scale(name))
        regression.mu_star[j] = float(np.exp(new[0]))
        scales.record(name, 1, accept_prob, adapt)

    if K > 1:
        regression.tau0 = update_tau0(rng, regression.mu_star,
                                      priors.intercept_df, priors.intercept_scale)


# --- Smoothing states ---

def update_smoothing(context: ModelContext, params: ParamState, priors: PriorConfig,
                     rng: np.random.Generator) -> None:
    """xi | tau, then tau | xi, beta for every spline term, then rho | xi per family"""
    smoothing = params.smoothing
    families = [] if context.dirichlet else [(ETIOLOGY, context.etiology_design)]
    families += [(side, context.subclass_design) for side in SIDES]

    for family, design in families:
        tau, xi = smoothing.tau[family], smoothing.xi[family]
        coef = params.regression.etiology if family == ETIOLOGY else params.regression.side(family)
        rho = smoothing.rho[ETIOLOGY if family == ETIOLOGY else 'subclass']
        for c in range(tau.shape[0]):
            for s, term in enumerate(design.spline_terms):
                beta = coef[c, term.columns]
                p_flexible = smoothing_indicator_prob(tau[c, s], rho, priors.tau_gamma,
                                                    priors.tau_invpareto)
                xi[c, s] = int(rng.random() < p_flexible)
                quad = float(beta @ term.basis.penalty @ beta)
                tau[c, s] = sample_tau_given_xi(rng, xi[c, s], quad, term.width,
                                                priors.tau_gamma, priors.tau_invpareto)

    if not context.dirichlet:
        ones = int(smoothing.xi[ETIOLOGY].sum())
        smoothing.rho[ETIOLOGY] = float(
            rng.beta(*smoothness_update(*priors.rho_etiology, ones, smoothing.xi[ETIOLOGY].size - ones)))
    sub = np.concatenate([smoothing.xi[side].ravel() for side in SIDES])
    ones = int(sub.sum())
    smoothing.rho['subclass'] = float(
        rng.beta(*smoothness_update(*priors.rho_subclass, ones, sub.size - ones)))
