import numpy as np
import pytest
from scipy import integrate, stats

from nplcm.middleware.error_handler import ConfigurationError, ModelError
from nplcm.priors.distributions import (
    beta_from_quantiles, intercept_hyper_logpdf, intercept_prior_logpdf, invpareto_cdf,
    invpareto_logpdf, sample_intercepts, sample_smoothing_mixture, sample_tau_given_xi,
    smoothing_indicator_prob, smoothing_mixture_logpdf, smoothness_hyper_logpdf,
    sample_invpareto, smoothness_update, spline_prior_logpdf,
)
from nplcm.splines.basis import difference_penalty


class TestBetaFromQuantiles:
    @pytest.mark.parametrize("q_lo, q_hi, a, b", [
        (0.55, 0.99, 7.13, 1.32),
        (0.05, 0.20, 7.59, 58.97),
    ])
    def test_published_priors(self, q_lo, q_hi, a, b):
        got_a, got_b = beta_from_quantiles(q_lo, q_hi)
        assert got_a == pytest.approx(a, abs=0.01)
        assert got_b == pytest.approx(b, abs=0.01)

    def test_concentrated_prior(self):
        a, b = beta_from_quantiles(0.525, 0.575)
        assert a == pytest.approx(835.95, rel=1e-4)
        assert b == pytest.approx(683.79, rel=1e-4)

    @pytest.mark.parametrize("q_lo, q_hi", [(0.55, 0.99), (0.5, 0.9), (0.2, 0.6)])
    def test_reproduces_quantiles(self, q_lo, q_hi):
        a, b = beta_from_quantiles(q_lo, q_hi)
        assert stats.beta.ppf(0.025, a, b) == pytest.approx(q_lo, abs=1e-6)
        assert stats.beta.ppf(0.975, a, b) == pytest.approx(q_hi, abs=1e-6)

    def test_invalid_range(self):
        with pytest.raises(ConfigurationError):
            beta_from_quantiles(0.9, 0.5)


class TestIntercepts:
    def test_density_at_mode(self):
        assert intercept_prior_logpdf(0.0, 1.0) == pytest.approx(np.log(2.0 / np.sqrt(2.0 * np.pi)))

    def test_negative_intercept(self):
        with pytest.raises(ModelError):
            intercept_prior_logpdf(-0.1, 1.0)

    def test_marginal_is_half_cauchy(self):
        """Integrating tau0 out of N+(0, 1/tau0) x Gamma(1/2, 50) gives half-Cauchy(10)"""
        def integrand(tau0):
            return np.exp(intercept_prior_logpdf(0.0, tau0) + intercept_hyper_logpdf(tau0))

        value, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
        assert value == pytest.approx(2.0 / (np.pi * 10.0), abs=1e-6)

    def test_intercept_draws_are_nonnegative_and_monotone(self):
        mu_star, tau0 = sample_intercepts(np.random.default_rng(3), 1000)
        assert np.all(mu_star >= 0.0)
        assert np.all(tau0 > 0.0)
        assert np.all(np.diff(np.cumsum(mu_star)) >= 0.0)


class TestSplinePrior:
    def test_constant_coefficients_have_no_roughness(self):
        _, penalty = difference_penalty(5)
        low = spline_prior_logpdf(np.zeros(5), 2.0, penalty)
        flat = spline_prior_logpdf(np.zeros(5), 30.0, penalty)
        # only the normalizing constant depends on tau for a flat curve
        assert flat - low == pytest.approx(2.0 * np.log(30.0 / 2.0))

    def test_penalty_contribution(self):
        _, penalty = difference_penalty(2)
        delta = spline_prior_logpdf([0.0, 1.0], 2.0, penalty) - spline_prior_logpdf([0.0, 0.0], 2.0, penalty)
        assert delta == pytest.approx(-1.0)

    def test_normalized_in_two_dimensions(self):
        _, penalty = difference_penalty(2)
        value, _ = integrate.dblquad(
            lambda b1, b0: np.exp(spline_prior_logpdf([b0, b1], 2.0, penalty)),
            -8.0, 8.0, -12.0, 12.0)
        assert value == pytest.approx(1.0, abs=1e-4)

    def test_nonpositive_precision(self):
        with pytest.raises(ModelError):
            spline_prior_logpdf(np.zeros(3), 0.0, difference_penalty(3)[1])


class TestSmoothingMixture:
    def test_invpareto_density_at_upper_bound(self):
        assert np.exp(invpareto_logpdf(400.0, 1.5, 400.0)) == pytest.approx(0.00375)
        assert invpareto_cdf(400.0, 1.5, 400.0) == pytest.approx(1.0)
        assert invpareto_logpdf(400.5, 1.5, 400.0) == -np.inf

    def test_mixture_rejects_nonpositive_tau(self):
        with pytest.raises(ModelError):
            smoothing_mixture_logpdf(0.0, 0.5)

    def test_mixture_above_bound_keeps_gamma_component(self):
        value = smoothing_mixture_logpdf(500.0, 0.5)
        expected = np.log(0.5) + stats.gamma.logpdf(500.0, 3.0, scale=0.5)
        assert value == pytest.approx(expected)

    def test_component_means(self):
        rng = np.random.default_rng(20240)
        tau, xi = sample_smoothing_mixture(rng, 0.5, size=100_000)
        flexible, smooth = tau[xi == 1], tau[xi == 0]
        # Gamma(3, rate 2) and InvPareto(1.5, 400)
        smooth_sd = np.sqrt(1.5 * 400.0 ** 2 / 3.5 - 240.0 ** 2)
        assert abs(flexible.mean() - 1.5) < 4 * np.sqrt(0.75 / flexible.size)
        assert abs(smooth.mean() - 240.0) < 4 * smooth_sd / np.sqrt(smooth.size)
        assert smooth.max() <= 400.0
        assert np.all(np.isfinite(smoothing_mixture_logpdf(tau[:1000], 0.5)))

    def test_indicator_odds_are_prior_odds_times_density_ratio(self):
        tau, rho = 4.2, 0.3
        g = stats.gamma.pdf(tau, 3.0, scale=0.5)
        ip = np.exp(invpareto_logpdf(tau, 1.5, 400.0))
        expected = rho * g / (rho * g + (1.0 - rho) * ip)
        assert smoothing_indicator_prob(tau, rho) == pytest.approx(expected)

    def test_small_precision_selects_flexible_component(self):
        assert smoothing_indicator_prob(1.0, 0.5) > 0.99
        assert smoothing_indicator_prob(300.0, 0.5) < 0.01

    def test_truncated_full_conditional_respects_bound(self):
        rng = np.random.default_rng(5)
        draws = [sample_tau_given_xi(rng, 0, quad_form=1e-3, n_basis=7) for _ in range(200)]
        assert max(draws) <= 400.0
        assert min(draws) > 0.0


class TestSmoothnessHyper:
    def test_default_means(self):
        assert stats.beta.mean(0.5, 1.0) == pytest.approx(1.0 / 3.0)
        assert stats.beta.mean(1.0, 0.5) == pytest.approx(2.0 / 3.0)

    def test_conjugate_update(self):
        assert smoothness_update(1.0, 1.0, 3, 1) == (4.0, 2.0)

    def test_rho_outside_unit_interval(self):
        with pytest.raises(ModelError):
            smoothness_hyper_logpdf(1.0, 0.5, 1.0)


def _inverse_cdf_sample(logpdf, lo, hi, size, rng, n_grid=20001):
    """Draws by inverting a CDF integrated numerically on a log grid over [lo, hi]"""
    s = np.linspace(np.log(lo), np.log(hi), n_grid)
    t = np.exp(s)
    density = np.exp(logpdf(t)) * t
    cdf = integrate.cumulative_trapezoid(density, s, initial=0.0)
    cdf /= cdf[-1]
    return np.exp(np.interp(rng.random(size), cdf, s))


def _half_t_logpdf(mu, nu=1.0, s0=10.0):
    """Marginal of mu* after integrating tau0 out on a log grid"""
    log_tau = np.linspace(-40.0, 8.0, 1501)
    tau = np.exp(log_tau)
    joint = (intercept_prior_logpdf(mu[:, None], tau[None, :])
             + intercept_hyper_logpdf(tau, nu, s0)[None, :] + log_tau[None, :])
    return np.log(integrate.trapezoid(np.exp(joint), log_tau, axis=1))


class TestSamplersAgainstNumericInversion:
    N_DRAWS = 10_000

    def _assert_same_law(self, draws, reference):
        assert stats.ks_2samp(draws, reference).pvalue > 0.01

    def test_intercept_precision(self):
        rng = np.random.default_rng(101)
        _, tau0 = sample_intercepts(rng, self.N_DRAWS)
        reference = _inverse_cdf_sample(intercept_hyper_logpdf, 1e-16, 10.0, self.N_DRAWS, rng)
        self._assert_same_law(tau0, reference)

    def test_intercept_marginal(self):
        rng = np.random.default_rng(102)
        mu_star, _ = sample_intercepts(rng, self.N_DRAWS)
        reference = _inverse_cdf_sample(_half_t_logpdf, 1e-7, 1e5, self.N_DRAWS, rng, n_grid=3001)
        self._assert_same_law(mu_star, reference)

    def test_invpareto(self):
        rng = np.random.default_rng(103)
        draws = sample_invpareto(rng, 1.5, 400.0, size=self.N_DRAWS)
        reference = _inverse_cdf_sample(lambda t: invpareto_logpdf(t, 1.5, 400.0),
                                        1e-6, 400.0, self.N_DRAWS, rng)
        self._assert_same_law(draws, reference)

    def test_smoothing_mixture(self):
        rng = np.random.default_rng(104)
        tau, _ = sample_smoothing_mixture(rng, 0.3, size=self.N_DRAWS)
        reference = _inverse_cdf_sample(lambda t: smoothing_mixture_logpdf(t, 0.3),
                                        1e-6, 400.0, self.N_DRAWS, rng, n_grid=40001)
        self._assert_same_law(tau, reference)

    def test_smoothness_hyperprior(self):
        rng = np.random.default_rng(105)
        draws = rng.beta(0.5, 1.0, size=self.N_DRAWS)
        reference = _inverse_cdf_sample(
            lambda t: np.array([smoothness_hyper_logpdf(v, 0.5, 1.0) for v in t]),
            1e-14, 1.0 - 1e-12, self.N_DRAWS, rng)
        self._assert_same_law(draws, reference)

    @pytest.mark.parametrize("xi", [0, 1])
    def test_tau_full_conditional(self, xi):
        rng = np.random.default_rng(106 + xi)
        quad_form, n_basis = 0.8, 7
        draws = np.array([sample_tau_given_xi(rng, xi, quad_form, n_basis)
                          for _ in range(self.N_DRAWS)])
        shape = (1.5 if xi == 0 else 3.0) + 0.5 * (n_basis - 1)
        rate = 0.5 * quad_form + (0.0 if xi == 0 else 2.0)
        upper = 400.0 if xi == 0 else 200.0
        reference = _inverse_cdf_sample(
            lambda t: stats.gamma.logpdf(t, shape, scale=1.0 / rate), 1e-6, upper, self.N_DRAWS, rng)
        self._assert_same_law(draws, reference)
