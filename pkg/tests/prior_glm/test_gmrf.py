import math
import unittest

import numpy as np
from scipy import stats

from prior_glm.gmrf import (
    GmrfPrecision,
    full_conditional_component,
    gmrf_log_prior,
    linear_predictor,
    log_tau_prior,
    structure_matrix,
)


class TestStructureMatrix(unittest.TestCase):

    def test_small_matrices(self):
        np.testing.assert_array_equal(structure_matrix(1), [[0.0]])
        np.testing.assert_array_equal(structure_matrix(3), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])

    def test_rows_sum_to_zero_and_semidefinite(self):
        q = structure_matrix(7)
        np.testing.assert_allclose(q.sum(axis=1), 0.0)
        self.assertGreater(np.linalg.eigvalsh(q).min(), -1e-12)
        self.assertEqual(np.linalg.matrix_rank(q), GmrfPrecision(7).rank)

    def test_banded_and_apply_agree_with_dense(self):
        q = GmrfPrecision(5)
        v = np.array([0.3, -1.2, 2.0, 0.7, 0.1])
        np.testing.assert_allclose(q.apply(v), q.dense @ v)
        self.assertAlmostEqual(q.quadratic_form(v), v @ q.dense @ v)
        np.testing.assert_array_equal(q.banded[1], np.diag(q.dense))
        np.testing.assert_array_equal(q.banded[0, 1:], np.diag(q.dense, k=1))

    def test_quadratic_form_is_shift_invariant(self):
        q = GmrfPrecision(4)
        v = np.array([1.0, 2.0, 0.5, -1.0])
        self.assertAlmostEqual(q.quadratic_form(v + 3.0), q.quadratic_form(v))


class TestGmrfLogPrior(unittest.TestCase):

    def test_zero_residual(self):
        design = np.array([[1.0], [2.0], [4.0]])
        beta = np.array([0.5])
        self.assertAlmostEqual(gmrf_log_prior(design @ beta, design, beta, 3.0), math.log(3.0))

    def test_one_grid_point(self):
        self.assertAlmostEqual(gmrf_log_prior([0.0, 1.0], None, None, 1.0), -0.5)

    def test_reduces_to_sum_of_squares_without_covariates(self):
        rng = np.random.default_rng(2)
        gamma = rng.normal(size=9)
        tau = 1.7
        expected = 4.0 * math.log(tau) - 0.5 * tau * np.sum((gamma[1:] - gamma[:-1]) ** 2)
        self.assertAlmostEqual(gmrf_log_prior(gamma, np.zeros((9, 2)), np.zeros(2), tau), expected, delta=1e-12)

    def test_errors(self):
        with self.assertRaises(ValueError):
            gmrf_log_prior([0.0, 1.0], None, None, 0.0)
        with self.assertRaises(ValueError):
            linear_predictor(np.ones((3, 2)), np.ones(2), 4)
        with self.assertRaises(ValueError):
            linear_predictor(np.array([[1.0], [np.nan]]), np.ones(1), 2)

    def test_log_tau_prior(self):
        self.assertAlmostEqual(
            log_tau_prior(2.0, 3.0, 0.5) - log_tau_prior(1.0, 3.0, 0.5),
            stats.gamma.logpdf(2.0, 3.0, scale=2.0) - stats.gamma.logpdf(1.0, 3.0, scale=2.0),
        )
        self.assertEqual(log_tau_prior(0.0, 1.0, 1.0), -math.inf)


class TestFullConditionalComponent(unittest.TestCase):

    def test_interior_without_covariates(self):
        mean, variance = full_conditional_component(1, [1.0, 0.0, 3.0], None, None, 1.0)
        self.assertAlmostEqual(mean, 2.0)
        self.assertAlmostEqual(variance, 0.5)

    def test_first_component(self):
        design = np.array([[0.4], [0.1], [0.0]])
        mean, variance = full_conditional_component(0, [0.0, 1.0, 0.0], design, np.array([1.0]), 2.0)
        self.assertAlmostEqual(mean, 1.3)
        self.assertAlmostEqual(variance, 0.5)

    def test_perturbation_ratio(self):
        rng = np.random.default_rng(5)
        n, tau = 6, 2.3
        design = rng.normal(size=(n, 2))
        beta = rng.normal(size=2)
        gamma = rng.normal(size=n)
        for i in range(n):
            mean, variance = full_conditional_component(i, gamma, design, beta, tau)
            perturbed = gamma.copy()
            perturbed[i] += rng.normal()
            joint = gmrf_log_prior(perturbed, design, beta, tau) - gmrf_log_prior(gamma, design, beta, tau)
            sd = math.sqrt(variance)
            conditional = stats.norm.logpdf(perturbed[i], mean, sd) - stats.norm.logpdf(gamma[i], mean, sd)
            self.assertAlmostEqual(joint, conditional, delta=1e-10)

    def test_index_out_of_range(self):
        with self.assertRaises(IndexError):
            full_conditional_component(3, [0.0, 1.0, 2.0], None, None, 1.0)
        with self.assertRaises(ValueError):
            full_conditional_component(0, [0.0], None, None, 1.0)


if __name__ == '__main__':
    unittest.main()
