"""
Prior Distributions
Densities, samplers and elicitation helpers for every model prior
"""
import logging
from typing import Tuple

import numpy as np
from scipy import optimize, stats
from scipy.special import betainc

from nplcm.middleware.error_handler import ConfigurationError, ModelError

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


# --- TPR elicitation ---

def _quantile_residual(log_ab, q_lo, q_hi, p_lo, p_hi):
    a, b = np.exp(log_ab)
    return [betainc(a, b, q_lo) - p_lo, betainc(a, b, q_hi) - p_hi]


def _moment_guess(q_lo: float, q_hi: float) -> Tuple[float, float]:
    mean = 0.5 * (q_lo + q_hi)
    sd = (q_hi - q_lo) / (2.0 * 1.96)
    concentration = max(mean * (1.0 - mean) / sd ** 2 - 1.0, 1.0)
    return mean * concentration, (1.0 - mean) * concentration


def _nested_bisection(q_lo, q_hi, p_lo, p_hi) -> Tuple[float, float]:
    """Outer bracket on log concentration, inner bracket on the mean"""
    eps = 1e-12

    def mean_for(kappa):
        f = lambda m: betainc(m * kappa, (1 - m) * kappa, q_hi) - p_hi
        return optimize.brentq(f, eps, 1 - eps, xtol=1e-15)

    def outer(log_kappa):
        kappa = np.exp(log_kappa)
        m = mean_for(kappa)
        return betainc(m * kappa, (1 - m) * kappa, q_lo) - p_lo

    log_kappa = optimize.brentq(outer, np.log(1e-2), np.log(1e7), xtol=1e-14)
    kappa = np.exp(log_kappa)
    m = mean_for(kappa)
    return m * kappa, (1 - m) * kappa


def beta_from_quantiles(q_lo: float, q_hi: float,
                        p_lo: float = 0.025, p_hi: float = 0.975) -> Tuple[float, float]:
    """
    Beta(a, b) whose p_lo and p_hi quantiles are q_lo and q_hi

    Solves the two CDF equations on (log a, log b) with a trust-region Newton
    root finder, falling back to nested bracketing.
    """
    if not 0.0 < q_lo < q_hi < 1.0:
        raise ConfigurationError("quantiles must satisfy 0 < q_lo < q_hi < 1")
    if not 0.0 < p_lo < p_hi < 1.0:
        raise ConfigurationError("probabilities must satisfy 0 < p_lo < p_hi < 1")

    args = (q_lo, q_hi, p_lo, p_hi)
    solution = optimize.root(_quantile_residual, np.log(_moment_guess(q_lo, q_hi)),
                             args=args, method='hybr', options={'xtol': 1e-14})
    a, b = np.exp(solution.x)
    if not (solution.success and np.max(np.abs(_quantile_residual(solution.x, *args))) < 1e-10):
        logger.info(f"Newton solve for quantiles ({q_lo}, {q_hi}) failed; bracketing instead")
        try:
            a, b = _nested_bisection(*args)
        except ValueError as e:
            raise ConfigurationError(f"beta_from_quantiles did not converge: {e}")

    error = max(abs(stats.beta.ppf(p_lo, a, b) - q_lo), abs(stats.beta.ppf(p_hi, a, b) - q_hi))
    if error > 1e-8:
        raise ConfigurationError(f"beta_from_quantiles did not converge (quantile error {error:.2e})")
    return float(a), float(b)


# --- Selective-stopping intercepts ---

def intercept_prior_logpdf(mu_star, tau0) -> np.ndarray:
    """Half-normal N+(0, 1/tau0) log-density"""
    mu_star = np.asarray(mu_star, dtype=float)
    if np.any(mu_star < 0):
        raise ModelError("intercept mu* must be nonnegative")
    return np.log(2.0) + stats.norm.logpdf(mu_star, 0.0, 1.0 / np.sqrt(tau0))


def intercept_hyper_logpdf(tau0, nu: float = 1.0, s0: float = 10.0) -> np.ndarray:
    """Gamma(nu/2, rate nu s0^2 / 2) log-density of the intercept precision"""
    a0, b0 = nu / 2.0, nu * s0 ** 2 / 2.0
    return stats.gamma.logpdf(tau0, a0, scale=1.0 / b0)


def sample_intercepts(rng: np.random.Generator, size: int, nu: float = 1.0,
                      s0: float = 10.0) -> Tuple[np.ndarray, np.ndarray]:
    """Draw (mu*, tau0); marginally mu* is half-t(nu, s0)"""
    a0, b0 = nu / 2.0, nu * s0 ** 2 / 2.0
    tau0 = rng.gamma(a0, 1.0 / b0, size=size)
    mu_star = np.abs(rng.normal(0.0, 1.0, size=size)) / np.sqrt(tau0)
    return mu_star, tau0


def update_tau0(rng: np.random.Generator, mu_star: np.ndarray, nu: float, s0: float) -> np.ndarray:
    """Conjugate Gamma update of the intercept precisions"""
    a0, b0 = nu / 2.0, nu * s0 ** 2 / 2.0
    return rng.gamma(a0 + 0.5, 1.0 / (b0 + 0.5 * mu_star ** 2))


# --- P-spline coefficients ---

def spline_prior_logpdf(beta, tau: float, penalty: np.ndarray, k_beta: float = 4.0) -> float:
    """
    Random-walk prior with N(0, 1/k_beta) on the first coefficient

    Normalized: the precision tau K + k_beta e1 e1^T has determinant
    k_beta tau^(C-1).
    """
    if tau <= 0:
        raise ModelError("smoothing precision must be positive")
    beta = np.asarray(beta, dtype=float)
    C = beta.size
    quad = float(beta @ penalty @ beta)
    return (-0.5 * C * LOG_2PI + 0.5 * np.log(k_beta) + 0.5 * (C - 1) * np.log(tau)
            - 0.5 * tau * quad - 0.5 * k_beta * beta[0] ** 2)


def sample_spline_prior(rng: np.random.Generator, n_basis: int, tau: float,
                        k_beta: float = 4.0) -> np.ndarray:
    steps = np.concatenate([
        rng.normal(0.0, 1.0 / np.sqrt(k_beta), size=1),
        rng.normal(0.0, 1.0 / np.sqrt(tau), size=n_basis - 1),
    ])
    return np.cumsum(steps)


# --- Smoothing precision mixture ---

def invpareto_logpdf(tau, a: float, b: float) -> np.ndarray:
    """log[(a/b)(tau/b)^(a-1)] on (0, b], -inf above b"""
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide='ignore'):
        inside = np.log(a / b) + (a - 1.0) * np.log(tau / b)
    return np.where((tau > 0) & (tau <= b), inside, -np.inf)


def invpareto_cdf(tau, a: float, b: float) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return np.clip(tau / b, 0.0, 1.0) ** a


def sample_invpareto(rng: np.random.Generator, a: float, b: float, size=None) -> np.ndarray:
    return b * rng.random(size) ** (1.0 / a)


def smoothing_mixture_logpdf(tau, weight: float, gamma_ab=(3.0, 2.0),
                             invpareto_ab=(1.5, 400.0)) -> np.ndarray:
    """
    log[w Gamma(tau; a, rate b) + (1 - w) InvPareto(tau; a', b')]

    The Gamma component is the flexible one (xi = 1); InvPareto keeps tau
    large and the curve smooth (xi = 0).
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ModelError("smoothing precision must be positive")
    with np.errstate(divide='ignore'):
        flexible = np.log(weight) + stats.gamma.logpdf(tau, gamma_ab[0], scale=1.0 / gamma_ab[1])
        smooth = np.log1p(-weight) + invpareto_logpdf(tau, *invpareto_ab)
    return np.logaddexp(flexible, smooth)


def sample_smoothing_mixture(rng: np.random.Generator, weight: float, size=None,
                             gamma_ab=(3.0, 2.0), invpareto_ab=(1.5, 400.0)):
    """Draw the component indicator xi ~ Bernoulli(weight), then tau from it"""
    xi = (rng.random(size) < weight).astype(int)
    gamma_draw = rng.gamma(gamma_ab[0], 1.0 / gamma_ab[1], size=size)
    pareto_draw = sample_invpareto(rng, *invpareto_ab, size=size)
    return np.where(xi == 1, gamma_draw, pareto_draw), xi


def smoothing_indicator_prob(tau: float, rho: float, gamma_ab=(3.0, 2.0),
                             invpareto_ab=(1.5, 400.0)) -> float:
    """P(xi = 1 | tau, rho) for the flexible Gamma component: prior odds times the density ratio at tau"""
    with np.errstate(divide='ignore'):
        flexible = np.log(rho) + stats.gamma.logpdf(tau, gamma_ab[0], scale=1.0 / gamma_ab[1])
        smooth = np.log1p(-rho) + invpareto_logpdf(tau, *invpareto_ab)
    return float(np.exp(flexible - np.logaddexp(flexible, smooth)))


def sample_tau_given_xi(rng: np.random.Generator, xi: int, quad_form: float, n_basis: int,
                        gamma_ab=(3.0, 2.0), invpareto_ab=(1.5, 400.0)) -> float:
    """
    Full conditional of tau given its indicator and the coefficient roughness

    xi = 1 gives Gamma(a + (C-1)/2, b + Q/2); xi = 0 gives
    Gamma(a' + (C-1)/2, Q/2) truncated to (0, b'].
    """
    extra = 0.5 * (n_basis - 1)
    if xi:
        a, b = gamma_ab
        return float(rng.gamma(a + extra, 1.0 / (b + 0.5 * quad_form)))
    a, upper = invpareto_ab
    shape, rate = a + extra, 0.5 * quad_form
    u = rng.random()
    if rate * upper < 1e-10:
        return float(upper * u ** (1.0 / shape))
    dist = stats.gamma(shape, scale=1.0 / rate)
    tau = float(dist.ppf(u * dist.cdf(upper)))
    return min(max(tau, np.finfo(float).tiny), upper)


# --- Smoothness inclusion probability ---

def smoothness_hyper_logpdf(rho: float, a: float, b: float) -> float:
    if not 0.0 < rho < 1.0:
        raise ModelError("rho must lie in (0, 1)")
    return float(stats.beta.logpdf(rho, a, b))


def smoothness_update(a: float, b: float, n_ones: int, n_zeros: int) -> Tuple[float, float]:
    """Beta-Bernoulli conjugate posterior parameters"""
    return a + n_ones, b + n_zeros


# --- Linear coefficients ---

def linear_prior_logpdf(gamma, sd: float = 3.0) -> float:
    return float(np.sum(stats.norm.logpdf(np.asarray(gamma, dtype=float), 0.0, sd)))
