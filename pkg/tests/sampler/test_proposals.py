import math
import unittest
from unittest.mock import MagicMock

import numpy as np
from scipy import optimize, stats

from coalescent.likelihood import SufficientStatistics
from common.errors import NumericalError
from prior_glm.gmrf import GmrfPrecision
from sampler.proposals import (
    GaussianProposal,
    draw_scale_factor,
    gaussian_approx,
    log_conditional_objective,
    newton_raphson_mode,
    objective_derivatives,
    propose_tau,
    quadratic_expansion,
    scale_factor_cdf,
)


def _fixed_rng(*values):
    rng = MagicMock()
    rng.random.side_effect = list(values)
    return rng


class TestTauProposal(unittest.TestCase):

    def test_scale_factor_distribution(self):
        rng = np.random.default_rng(1)
        draws = [draw_scale_factor(1.5, rng) for _ in range(20_000)]
        self.assertGreaterEqual(min(draws), 1 / 1.5)
        self.assertLessEqual(max(draws), 1.5)
        result = stats.kstest(draws, lambda f: scale_factor_cdf(f, 1.5))
        self.assertGreater(result.pvalue, 0.01)

    def test_cdf_endpoints(self):
        self.assertAlmostEqual(scale_factor_cdf(1 / 2.0, 2.0), 0.0)
        self.assertAlmostEqual(scale_factor_cdf(2.0, 2.0), 1.0)
        below_one = (1 - 2.0**-2) / 2 + math.log(2.0)
        total = (2.0**2 - 2.0**-2) / 2 + 2 * math.log(2.0)
        self.assertAlmostEqual(scale_factor_cdf(1.0, 2.0), below_one / total, places=12)

    def test_doubling_correction(self):
        # u = 1 on the f branch gives f = F
        tau_star, correction = propose_tau(3.0, 2.0, _fixed_rng(1.0, 0.0))
        self.assertAlmostEqual(tau_star, 6.0)
        self.assertAlmostEqual(correction, -math.log(2.0))

    def test_identity_move(self):
        tuning = 2.0
        u = (1 - tuning**-2) / (tuning**2 - tuning**-2)
        tau_star, correction = propose_tau(3.0, tuning, _fixed_rng(u, 0.0))
        self.assertAlmostEqual(tau_star, 3.0)
        self.assertAlmostEqual(correction, 0.0)

    def test_detailed_balance_on_a_gamma_target(self):
        rng = np.random.default_rng(4)
        shape, rate = 3.0, 2.0
        tau, thinning, kept = 1.0, 100, []
        for it in range(1, 300_001):
            tau_star, correction = propose_tau(tau, 1.8, rng)
            log_ratio = (shape - 1) * math.log(tau_star / tau) - rate * (tau_star - tau) + correction
            if math.log(rng.random()) < log_ratio:
                tau = tau_star
            if it % thinning == 0:
                kept.append(tau)
        result = stats.kstest(kept, stats.gamma(shape, scale=1.0 / rate).cdf)
        self.assertGreater(result.pvalue, 0.01)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            propose_tau(0.0, 1.5, np.random.default_rng(0))
        with self.assertRaises(ValueError):
            draw_scale_factor(1.0, np.random.default_rng(0))


class TestNewtonRaphson(unittest.TestCase):

    def test_single_interval_without_prior(self):
        result = newton_raphson_mode([1.5], SufficientStatistics.from_totals([1.0], [1.0]), None, None, 0.0)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.mode[0], 0.0, places=8)

    def test_converged_gradient_is_below_tolerance(self):
        ss = SufficientStatistics.from_totals([2.0, 0.0, 3.0, 1.0], [3.0, 1.5, 2.0, 0.4])
        result = newton_raphson_mode(np.zeros(4), ss, None, None, 2.0, tol=1e-10)
        self.assertTrue(result.converged)
        self.assertLess(result.gradient_norm, 1e-10)

    def test_matches_derivative_free_maximizer(self):
        rng = np.random.default_rng(8)
        ss = SufficientStatistics.from_totals(rng.integers(0, 4, 4).astype(float), rng.uniform(0.2, 3.0, 4))
        design = rng.normal(size=(4, 2))
        beta = rng.normal(size=2)
        tau = 1.3
        q = GmrfPrecision(4)
        zb = design @ beta
        result = newton_raphson_mode(np.zeros(4), ss, design, beta, tau)
        search = optimize.minimize(
            lambda g: -log_conditional_objective(g, ss, zb, tau, q),
            np.zeros(4),
            method="Powell",
            options={"xtol": 1e-12, "ftol": 1e-15, "maxfev": 100_000},
        )
        np.testing.assert_allclose(result.mode, search.x, atol=1e-5)
        self.assertGreaterEqual(
            log_conditional_objective(result.mode, ss, zb, tau, q) + 1e-12,
            log_conditional_objective(search.x, ss, zb, tau, q),
        )

    def test_non_finite_start(self):
        ss = SufficientStatistics.from_totals([1.0], [1.0])
        with self.assertRaises(NumericalError):
            newton_raphson_mode([-1000.0], ss, None, None, 0.0)


class TestObjectiveDerivatives(unittest.TestCase):

    def test_match_finite_differences(self):
        rng = np.random.default_rng(21)
        h = 1e-5
        for _ in range(100):
            n = int(rng.integers(1, 8))
            ss = SufficientStatistics.from_totals(
                rng.integers(0, 4, n).astype(float), rng.uniform(0.0, 3.0, n) * (rng.random(n) > 0.1)
            )
            gamma, zb, tau = rng.normal(size=n), rng.normal(size=n), float(rng.uniform(0.1, 5.0))
            q = GmrfPrecision(n)
            gradient, weighted = objective_derivatives(gamma, ss, zb, tau, q)
            for k in range(n):
                step = np.zeros(n)
                step[k] = h
                numeric = (
                    log_conditional_objective(gamma + step, ss, zb, tau, q)
                    - log_conditional_objective(gamma - step, ss, zb, tau, q)
                ) / (2 * h)
                self.assertAlmostEqual(gradient[k], numeric, delta=1e-6 * max(1.0, abs(numeric)))
                plus, _ = objective_derivatives(gamma + step, ss, zb, tau, q)
                minus, _ = objective_derivatives(gamma - step, ss, zb, tau, q)
                second = (plus[k] - minus[k]) / (2 * h)
                expected = -(tau * q.dense[k, k] + weighted[k])
                self.assertAlmostEqual(second, expected, delta=1e-6 * max(1.0, abs(expected)))

    def test_quadratic_error_shrinks_cubically(self):
        ss = SufficientStatistics.from_totals([1.0, 2.0, 0.0, 1.0], [2.5, 1.0, 0.7, 0.3])
        center = np.array([0.3, -0.2, 0.1, 0.5])
        constant, linear, quadratic = quadratic_expansion(center, ss)

        def error(eps):
            g = center + eps
            exact = g * ss.counts + ss.ss * np.exp(-g)
            return exact - (constant + linear * g + quadratic * g**2)

        weighted = ss.ss * np.exp(-center)
        for eps in (0.04, 0.02, 0.01):
            np.testing.assert_allclose(error(eps), -weighted * eps**3 / 6, rtol=0.02)
        np.testing.assert_allclose(error(0.02) / error(0.01), 8.0, rtol=0.02)


class TestGaussianApproximation(unittest.TestCase):

    def setUp(self):
        self.ss = SufficientStatistics.from_totals([1.0, 2.0, 0.0, 1.0], [2.5, 1.0, 0.7, 0.3])

    def test_taylor_agreement(self):
        center = np.array([0.3, -0.2, 0.1, 0.5])
        constant, linear, quadratic = quadratic_expansion(center, self.ss)

        def h(g):
            return g * self.ss.counts + self.ss.ss * np.exp(-g)

        np.testing.assert_allclose(constant + linear * center + quadratic * center**2, h(center))
        delta = 1e-3
        approx = constant + linear * (center + delta) + quadratic * (center + delta) ** 2
        np.testing.assert_allclose(approx, h(center + delta), atol=1e-8)

    def test_mean_is_the_mode(self):
        tau = 1.7
        mode = newton_raphson_mode(np.zeros(4), self.ss, None, None, tau, tol=1e-12).mode
        proposal = gaussian_approx(mode, self.ss, None, None, tau)
        np.testing.assert_allclose(proposal.mean, mode, atol=1e-9)
        expected = tau * GmrfPrecision(4).dense + np.diag(self.ss.ss * np.exp(-mode))
        np.testing.assert_allclose(proposal.precision, expected)

    def test_pure_gaussian_target(self):
        tau = 0.8
        zb = np.array([0.1, 0.4, -0.3])
        curvature = np.array([1.0, 2.0, 0.5])
        linear = np.array([0.2, -0.1, 0.3])
        proposal = GaussianProposal.build(np.zeros(3), tau, zb, curvature, linear)
        precision = tau * GmrfPrecision(3).dense + np.diag(curvature)
        mean = np.linalg.solve(precision, tau * GmrfPrecision(3).dense @ zb - linear)
        np.testing.assert_allclose(proposal.mean, mean)
        target = stats.multivariate_normal(mean, np.linalg.inv(precision))
        x = np.array([0.5, -0.5, 1.0])
        self.assertAlmostEqual(proposal.log_density(x), target.logpdf(x))
        draws = np.array([proposal.sample(np.random.default_rng(i)) for i in range(20_000)])
        np.testing.assert_allclose(draws.mean(axis=0), mean, atol=0.05)
        np.testing.assert_allclose(np.cov(draws.T), np.linalg.inv(precision), atol=0.05)

    def test_degenerate_precision(self):
        ss = SufficientStatistics.from_totals([0.0, 0.0], [0.0, 0.0])
        with self.assertRaises(NumericalError):
            gaussian_approx(np.zeros(2), ss, None, None, 1.0)


if __name__ == '__main__':
    unittest.main()
