"""
Chain State
Initial states and forward prior draws
"""
import logging
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from nplcm.data.schemas import PriorConfig
from nplcm.models.design import ModelContext
from nplcm.models.params import (
    CASE, CONTROL, ETIOLOGY, LatentState, ParamState, RateParams, RegressionParams,
    SmoothingState,
)
from nplcm.priors.distributions import (
    sample_intercepts, sample_smoothing_mixture, sample_spline_prior,
)

logger = logging.getLogger(__name__)

INIT_COEF_SD = 0.1
SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True)
class PriorArrays:
    """PriorConfig resolved against a model context"""
    tpr_brs: np.ndarray
    tpr_ss: np.ndarray
    fpr: Tuple[float, float]
    config: PriorConfig

    @classmethod
    def resolve(cls, context: ModelContext, priors: PriorConfig) -> 'PriorArrays':
        ss_names = list(context.dataset.ss_pathogens)[:context.n_ss]
        return cls(
            tpr_brs=priors.tpr_brs_pairs(list(context.dataset.pathogens)),
            tpr_ss=priors.tpr_ss_pairs(ss_names) if ss_names else np.empty((0, 2)),
            fpr=tuple(priors.fpr),
            config=priors,
        )


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def chain_seed(base_seed: int, chain: int) -> np.random.SeedSequence:
    """Stream of chain c depends only on (base seed, c)"""
    return np.random.SeedSequence(base_seed, spawn_key=(chain,))


def smoothing_shapes(context: ModelContext) -> Dict[str, Tuple[int, int]]:
    K, L = context.n_subclasses, context.n_causes
    shapes = {}
    if not context.dirichlet:
        shapes[ETIOLOGY] = (L, len(context.etiology_design.spline_terms))
    n_sub = len(context.subclass_design.spline_terms) if K > 1 else 0
    shapes[CONTROL] = (K - 1, n_sub)
    shapes[CASE] = (K - 1, n_sub)
    return shapes


def _sample_rates(rng: np.random.Generator, context: ModelContext, arrays: PriorArrays) -> RateParams:
    J, K = context.n_pathogens, context.n_subclasses
    a, b = arrays.tpr_brs[:, 0:1], arrays.tpr_brs[:, 1:2]
    theta = rng.beta(np.broadcast_to(a, (J, K)), np.broadcast_to(b, (J, K)))
    psi = rng.beta(arrays.fpr[0], arrays.fpr[1], size=(J, K))
    theta_ss = (rng.beta(arrays.tpr_ss[:, 0], arrays.tpr_ss[:, 1])
                if context.n_ss else np.empty(0))
    return RateParams(interior_probs(theta), interior_probs(psi), interior_probs(theta_ss))


def interior_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def _sample_smoothing(rng: np.random.Generator, context: ModelContext,
                      priors: PriorConfig) -> SmoothingState:
    rho = {
        ETIOLOGY: float(rng.beta(*priors.rho_etiology)),
        'subclass': float(rng.beta(*priors.rho_subclass)),
    }
    tau, xi = {}, {}
    for family, shape in smoothing_shapes(context).items():
        weight = rho[ETIOLOGY] if family == ETIOLOGY else rho['subclass']
        tau[family], xi[family] = sample_smoothing_mixture(
            rng, weight, size=shape, gamma_ab=priors.tau_gamma, invpareto_ab=priors.tau_invpareto,
        )
    return SmoothingState(tau=tau, xi=xi, rho=rho)


def _etiology_table(rng: np.random.Generator, context: ModelContext, alpha: float) -> np.ndarray:
    S = context.strata_rows.shape[0]
    return rng.dirichlet(np.full(context.n_causes, alpha), size=S)


def init_state(context: ModelContext, priors: PriorConfig,
               seed: SeedLike) -> Tuple[ParamState, LatentState]:
    """
    Deterministic initial state

    Rates and smoothing states come from their priors, regression coefficients
    from N(0, 0.1^2), intercepts from the selective-stopping prior and latent
    allocations from uniform distributions.
    """
    rng = as_generator(seed)
    arrays = PriorArrays.resolve(context, priors)
    K, L = context.n_subclasses, context.n_causes
    px, pw = context.etiology_design.width, context.subclass_design.width

    rates = _sample_rates(rng, context, arrays)
    mu_star, tau0 = sample_intercepts(rng, K - 1, priors.intercept_df, priors.intercept_scale)
    regression = RegressionParams(
        etiology=(np.zeros((L, 0)) if context.dirichlet
                  else rng.normal(0.0, INIT_COEF_SD, size=(L, px))),
        control=rng.normal(0.0, INIT_COEF_SD, size=(K - 1, pw)),
        case=rng.normal(0.0, INIT_COEF_SD, size=(K - 1, pw)),
        mu_star=mu_star,
        tau0=tau0,
        u=np.tril(np.ones((K - 1, K - 1))),
    )
    if context.dirichlet:
        regression.etiology_table = _etiology_table(rng, context, priors.dirichlet_alpha)
        regression.etiology_strata = context.strata_rows
    smoothing = _sample_smoothing(rng, context, priors)

    latents = LatentState(
        case_class=rng.integers(0, L, size=context.cases.n),
        case_subclass=rng.integers(0, K, size=context.cases.n),
        control_subclass=rng.integers(0, K, size=context.controls.n),
    )
    return ParamState(rates, regression, smoothing), latents


def _sample_coefficients(rng: np.random.Generator, design, tau: np.ndarray, n_rows: int,
                         priors: PriorConfig) -> np.ndarray:
    coef = np.zeros((n_rows, design.width))
    for r in range(n_rows):
        coef[r, :design.n_linear] = rng.normal(0.0, priors.linear_sd, size=design.n_linear)
        for s, term in enumerate(design.spline_terms):
            coef[r, term.columns] = sample_spline_prior(rng, term.width, tau[r, s], priors.k_beta)
    return coef


def sample_prior(context: ModelContext, priors: PriorConfig, seed: SeedLike) -> ParamState:
    """Forward draw of every parameter from its prior"""
    rng = as_generator(seed)
    arrays = PriorArrays.resolve(context, priors)
    K, L = context.n_subclasses, context.n_causes

    rates = _sample_rates(rng, context, arrays)
    smoothing = _sample_smoothing(rng, context, priors)
    mu_star, tau0 = sample_intercepts(rng, K - 1, priors.intercept_df, priors.intercept_scale)
    if context.dirichlet:
        etiology = np.zeros((L, 0))
    else:
        etiology = _sample_coefficients(rng, context.etiology_design, smoothing.tau[ETIOLOGY], L, priors)
    regression = RegressionParams(
        etiology=etiology,
        control=_sample_coefficients(rng, context.subclass_design, smoothing.tau[CONTROL], K - 1, priors),
        case=_sample_coefficients(rng, context.subclass_design, smoothing.tau[CASE], K - 1, priors),
        mu_star=mu_star,
        tau0=tau0,
        u=np.tril(np.ones((K - 1, K - 1))),
    )
    if context.dirichlet:
        regression.etiology_table = _etiology_table(rng, context, priors.dirichlet_alpha)
        regression.etiology_strata = context.strata_rows
    return ParamState(rates, regression, smoothing)
