import unittest

import numpy as np

from prior_glm.coefficients import Coefficients, HyperParams, beta_full_conditional


class TestCoefficients(unittest.TestCase):

    def test_default_prior(self):
        beta = Coefficients.default(2)
        np.testing.assert_array_equal(beta.prior_mean, [0.0, 0.0])
        np.testing.assert_array_equal(beta.prior_variance, [100.0, 100.0])
        np.testing.assert_allclose(beta.prior_precision, np.eye(2) / 100.0)

    def test_invalid_prior_variance(self):
        with self.assertRaises(ValueError):
            Coefficients(values=[0.0], prior_variance=[0.0])

    def test_log_prior(self):
        beta = Coefficients(values=[1.0], prior_mean=[0.0], prior_variance=[4.0])
        self.assertAlmostEqual(beta.log_prior(), -0.125 - 0.5 * np.log(8.0 * np.pi))
        self.assertEqual(beta.with_values([2.0]).values[0], 2.0)


class TestHyperParams(unittest.TestCase):

    def test_defaults(self):
        hyper = HyperParams()
        self.assertEqual((hyper.tau_shape, hyper.tau_rate), (0.001, 0.001))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            HyperParams(tau_shape=0.0)
        with self.assertRaises(ValueError):
            HyperParams(scale_factor=1.0)


class TestBetaFullConditional(unittest.TestCase):

    def test_single_coefficient_on_two_intervals(self):
        gamma = np.array([0.2, 1.5])
        conditional = beta_full_conditional(gamma, np.array([[0.0], [1.0]]), 1.0, Coefficients.default(1))
        np.testing.assert_allclose(conditional.precision, [[1.01]])
        np.testing.assert_allclose(conditional.mean, [(1.5 - 0.2) / 1.01])

    def test_zero_tau_gives_the_prior(self):
        prior = Coefficients(values=[0.0, 0.0], prior_mean=[1.0, -2.0], prior_variance=[3.0, 5.0])
        conditional = beta_full_conditional(np.array([0.0, 1.0, 4.0]), np.ones((3, 2)), 0.0, prior)
        np.testing.assert_allclose(conditional.mean, prior.prior_mean)
        np.testing.assert_allclose(conditional.precision, prior.prior_precision)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            beta_full_conditional(np.zeros(3), np.ones((2, 1)), 1.0, Coefficients.default(1))


if __name__ == '__main__':
    unittest.main()
